from .boxes import iou, iou_at_theta, iou_matrix, role_ious
from .cider import DocumentFrequency, cider, cider_pair, tokenize
from .gied import entity_distances, gied, match_entities
from .hota import ALPHAS, HotaResult, TrackSet, hota
from .hungarian import hungarian_match
from .lea import LeaScore, lea, lea_soft, link
from .verb import verb_accuracy, verb_hits

__all__ = [
    "ALPHAS", "DocumentFrequency", "HotaResult", "LeaScore", "TrackSet", "cider", "cider_pair",
    "entity_distances", "gied", "hota", "hungarian_match", "iou", "iou_at_theta", "iou_matrix",
    "lea", "lea_soft", "link", "match_entities", "role_ious", "tokenize", "verb_accuracy", "verb_hits",
]
