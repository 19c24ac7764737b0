"""
Federated learning protocol workbench.
"""
