"""
Constants for the federated learning protocol workbench.
"""

# Cryptosystem defaults
DEFAULT_KEY_BITS = 2048
MIN_KEY_BITS = 64
ENCODING_BASE = 16
DEFAULT_FIXED_POINT_EXPONENT = -40

# PSI group defaults
DEFAULT_GROUP_BITS = 2048

# RFC 3526 group 14 (2048-bit MODP), a safe prime
RFC3526_GROUP14_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)

# Party roles, encoded in the high byte of a 2-byte party id
ROLE_CODES = {
    "A": 1,
    "B": 2,
    "C": 3,
    "server": 4,
    "client": 5,
}

# Payload kinds and their 2-byte wire ids
PAYLOAD_KINDS = {
    "pk-distribution": 0x0001,
    "psi-blinded-batch": 0x0101,
    "psi-double-blinded-batch": 0x0102,
    "psi-match-indices": 0x0103,
    "vfl-uA-batch": 0x0201,
    "vfl-lossA": 0x0202,
    "vfl-d-batch": 0x0203,
    "vfl-loss-total": 0x0204,
    "vfl-masked-grad": 0x0205,
    "vfl-grad-reply": 0x0206,
    "vfl-stop": 0x0207,
    "vfl-predict-request": 0x0208,
    "vfl-predict-share": 0x0209,
    "hfl-masked-update": 0x0301,
    "hfl-broadcast": 0x0302,
    "hfl-stop": 0x0303,
}

# Horizontal masking schemes, with the CLI aliases
MASK_SCHEMES = ("homomorphic", "pairwise", "gaussian-noise", "none")
SCHEME_ALIASES = {
    "he": "homomorphic",
    "homomorphic": "homomorphic",
    "pairwise": "pairwise",
    "dp": "gaussian-noise",
    "gaussian-noise": "gaussian-noise",
    "none": "none",
}

# Pairwise masks live in Z_(2^256)
PAIRWISE_MASK_BITS = 256

# Experiment defaults
HOLDOUT_FRACTION = 0.2
DEFAULT_MAX_STEPS = 1_000_000
DEFAULT_OUT_DIR = "runs"
DEFAULT_LOG_LEVEL = "INFO"

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_PROTOCOL_ERROR = 3
EXIT_SAFETY_REFUSAL = 4
