"""Attested dynamic loading and execution of native functions.

Client/server toolkit: position-independent machine-code payloads are
extracted from compiled objects, provisioned over an attested encrypted
channel into a capacity-bounded executable arena, and executed by id.
"""

from .addrmap import AddressMap, AddressMapEntry, build_address_map
from .attest import SessionKeys, compute_measurement
from .client import ClientSession
from .descriptor import SignatureDescriptor
from .elfobj import extract_function, from_hexstring, parse_object, to_hexstring
from .enclave import Enclave, EnclaveConfig, ExecResult, RuntimeEntry, default_runtime_table
from .rewrite import rewrite_source
from .server import DynfnServer

__all__ = [
    "AddressMap",
    "AddressMapEntry",
    "ClientSession",
    "DynfnServer",
    "Enclave",
    "EnclaveConfig",
    "ExecResult",
    "RuntimeEntry",
    "SessionKeys",
    "SignatureDescriptor",
    "build_address_map",
    "compute_measurement",
    "default_runtime_table",
    "extract_function",
    "from_hexstring",
    "parse_object",
    "rewrite_source",
    "to_hexstring",
]
