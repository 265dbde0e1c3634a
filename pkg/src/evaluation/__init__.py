"""
Evaluation Package

Architecture:
    performance_metrics.py  → MetricsReport, compute_metrics(), report CSV
    predictions.py          → "predictions v1" reader / writer
    ablation.py             → comparison arms and the "ablation v1" table

Submodules are imported directly (training code depends on the metrics
module, and predictions / ablation depend on training).
"""
