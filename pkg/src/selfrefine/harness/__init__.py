from .corpus import CorpusItem, RunConfig, demo_corpus, load_corpus, run_corpus
from .report import CostReport, ModelPrice, PriceSheet, cost_report, format_report
from .transcripts import read_transcripts, transcript_from_dict, transcript_to_dict, write_transcripts

__all__ = [
    "CorpusItem",
    "CostReport",
    "ModelPrice",
    "PriceSheet",
    "RunConfig",
    "cost_report",
    "demo_corpus",
    "format_report",
    "load_corpus",
    "read_transcripts",
    "run_corpus",
    "transcript_from_dict",
    "transcript_to_dict",
    "write_transcripts",
]
