"""Multimodal entity coreference toolkit for video situation recognition.

Visual clustering of box proposals into entity tracks, assignment of
entity role groups to clusters, gold-group derivation and the evaluation
metrics (verb accuracy, CIDEr, LEA, LEA-Soft, IoU@theta, HOTA, grouping
purity, GIED).
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: F401
    BoundingBox,
    BoxProposal,
    EntityGroupSet,
    Event,
    ProposalSet,
    RoleSlot,
    VideoAnnotation,
    VisualClusterSet,
    derive_roles,
    mention_map_to_groups,
    normalize_caption,
)
