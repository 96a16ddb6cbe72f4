# Utilities - Logging, Errors, Seeds & Digests
