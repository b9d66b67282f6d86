"""Per-mode resolvent calculus and log-term extraction for APS-type boundary problems.

Modules: spectral_model (model operators), symfrac (exact per-mode fractions),
product_resolvent (closed forms and perturbation series), grade_algebra (symbol
grading), log_extractor (log-power enumeration), trace_numerics (fits, oracles,
zeta/eta), suites (acceptance checks) and cli.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
