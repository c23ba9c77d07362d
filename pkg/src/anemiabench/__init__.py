"""Benchmarking toolkit for childhood-anemia risk prediction.

Covers the full survey-data workflow: CSV ingestion and categorical
encoding, multi-method feature-selection consensus, leakage-safe SMOTE,
nine classifiers behind one interface, repeated stratified cross-validated
grid search, an eight-metric evaluation suite, and contingency-table
epidemiology (crude and adjusted odds ratios).
"""

__version__ = "0.1.0"

REPORT_FORMAT_VERSION = 1
