"""
irdata: 红外序列数据模型与 IRS 容器读写
"""

from .models import (
    Annotation,
    BoundingBox,
    DatasetManifest,
    EngineState,
    IRFrame,
    IRSequence,
    ManifestEntry,
    View,
    WINDOW_FRAMES,
)
from .container import (
    canonical_json,
    content_digest,
    load_annotations,
    load_manifest,
    load_sequence,
    save_annotations,
    save_manifest,
    save_sequence,
)
from .geometry import clip_box, crop_resize, iou, max_over_box, pixel_span

__all__ = [
    "Annotation", "BoundingBox", "DatasetManifest", "EngineState", "IRFrame",
    "IRSequence", "ManifestEntry", "View", "WINDOW_FRAMES",
    "load_annotations", "load_manifest", "load_sequence", "save_annotations",
    "save_manifest", "save_sequence", "canonical_json", "content_digest",
    "clip_box", "crop_resize", "iou", "max_over_box", "pixel_span",
]
