"""ecshor: reversible elliptic-curve circuits, simulation and cost estimation.

Builds Toffoli-network circuits for the arithmetic of Shor's ECDLP
algorithm (integer adders, Montgomery modular arithmetic, extended-Euclid
inversion, windowed affine Weierstrass point addition), simulates them on
classical basis states, and estimates T-count / T-depth / width under
low-width, low-T and low-depth strategies.
"""
from .circuit import (ANDInverseMismatch, Circuit, CircuitError,
                      ConstantTooLarge, InputOutOfRange, InsufficientSamples,
                      InvalidWindow, NonLIFORelease, NotInvertible, Op,
                      Register, RegisterOverlap, ReleaseNonZero, UnknownCurve,
                      serialize)
from .context import (AdderFamily, BuilderContext, CountBackend, FanInMode,
                      GateCostTable, GateCosts, ResourceEstimate,
                      SimulateBackend, Strategy, StrategyVariant,
                      ToffoliDecomposition, build_context, count_context,
                      estimate, fan_in, fan_out, sim_context, simulate)

__version__ = "0.1.0"
