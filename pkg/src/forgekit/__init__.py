"""forgekit: copy-move forgery synthesis and domain-adaptive classification."""

__version__ = "0.1.0"
