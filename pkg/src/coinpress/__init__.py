"""coinpress: a simulator for sampling elements with their probabilities.

A verifier that knows nothing about a finite distribution interacts with a
prover that holds it. At the end the verifier either rejects or outputs a
pair (x, p), where an honest prover makes p the exact probability of x and
makes x come out with roughly that probability. The package contains the
protocol engine, canonical cheating provers, an exact-enumeration oracle
for tiny instances, a Monte Carlo harness, and a compiler that turns
private-coin interactive proofs into public-coin ones by repeated sampling.
"""

from coinpress.dist import ExplicitDistribution, Histogram, build_histogram
from coinpress.protocol import ProtocolParams, derive_params, run_protocol

__all__ = [
    "ExplicitDistribution",
    "Histogram",
    "build_histogram",
    "ProtocolParams",
    "derive_params",
    "run_protocol",
]

__version__ = "0.1.0"
