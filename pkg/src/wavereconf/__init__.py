"""Wave-like decentralized role reallocation for resource-flow systems."""
__version__ = "0.1.0"
