"""fieldfuse-bridge: offline exporter feeding real encoder embeddings into
the fieldfuse engine through its file formats."""

from .export import ExportJob, ImageInput, export_pixel_features, export_text_table
from .models import (
    ModelUnavailable,
    ShapeMismatch,
    StubPixelModel,
    StubTextModel,
    pixel_model,
    text_model,
)

__version__ = "0.1.0"
