"""Document encoder sidecar for the hindsight evaluation pipeline."""

__version__ = "0.1.0"

from hs_embed.encoder import (  # noqa: F401
    EncodeError,
    EncodeRequest,
    EncodeResult,
    EncoderLoadError,
    encode_documents,
)
