"""End-to-end analysis of one embedded chain."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .complex import DistanceMatrix, Filtration, build_rips, distance_matrix
from .embedding import EmbeddedChain
from .encoding import PointCloud, Scheme, encode_chain, resolve_scheme, structural_encoding
from .errors import ConfigError
from .metrics import InfinitePolicy, TopologyReport, build_report
from .persistence import PersistenceDiagram, compute_persistence


@dataclass
class AnalysisConfig:
    scheme: str = "auto"
    d_pe: int | None = None
    scale: float = 1.0
    normalize: bool = False
    metric: str = "euclidean"
    weights: tuple[float, float] = (0.5, 0.5)
    eps_max: float | None = None
    max_dim: int = 1  # highest homology dimension reported
    dims: tuple[int, ...] | None = None
    min_persistence: float = 0.0
    infinite_policy: str = "exclude"

    def validate(self):
        if self.metric not in ("euclidean", "cosine", "combined"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.eps_max is not None and not self.eps_max > 0:
            raise ConfigError(f"eps_max must be positive, got {self.eps_max}")
        if not 0 <= self.max_dim <= 2:
            raise ConfigError(f"max_dim must be 0, 1 or 2, got {self.max_dim}")
        dims = self.report_dims()
        if any(k > self.max_dim or k < 0 for k in dims):
            raise ConfigError(f"requested dims {list(dims)} exceed max_dim {self.max_dim}")
        if self.max_dim < 1 and self.dims is None:
            raise ConfigError("max_dim 0 drops H1 from the default report; pass dims=(0,) to confirm")
        if self.min_persistence < 0:
            raise ConfigError("min_persistence must be non-negative")
        if any(w < 0 for w in self.weights):
            raise ConfigError("metric weights must be non-negative")
        InfinitePolicy(self.infinite_policy)
        Scheme(self.scheme)
        return self

    def report_dims(self):
        return tuple(self.dims) if self.dims is not None else tuple(range(self.max_dim + 1))

    def provenance(self) -> dict:
        out = asdict(self)
        out["weights"] = list(self.weights)
        if self.dims is not None:
            out["dims"] = list(self.dims)
        return out


@dataclass(eq=False)
class ChainAnalysis:
    cloud: PointCloud
    distances: DistanceMatrix
    filtration: Filtration
    diagram: PersistenceDiagram
    report: TopologyReport
    extras: dict = field(default_factory=dict)


def chain_distances(ec: EmbeddedChain, config: AnalysisConfig) -> tuple[PointCloud, DistanceMatrix]:
    cloud = encode_chain(ec, config.scheme, config.d_pe, config.scale, config.normalize)
    if config.metric != "combined":
        return cloud, distance_matrix(cloud, config.metric)
    scheme = resolve_scheme(ec.chain.paradigm, config.scheme)
    d_pe = cloud.provenance["d_pe"]
    semantic = np.asarray(ec.vectors, dtype=np.float64)
    structural = config.scale * structural_encoding(ec.chain, scheme, d_pe)
    return cloud, distance_matrix(semantic, "combined", structural, config.weights)


def analyze(ec: EmbeddedChain, config: AnalysisConfig | None = None) -> ChainAnalysis:
    config = (config or AnalysisConfig()).validate()
    cloud, dm = chain_distances(ec, config)
    filt = build_rips(dm, config.eps_max, config.max_dim + 1)
    diag = compute_persistence(filt)
    prov = {"metric": config.metric, "scheme": cloud.provenance["scheme"],
            "d_pe": cloud.provenance["d_pe"], "scale": config.scale, "normalize": config.normalize,
            "weights": list(config.weights) if config.metric == "combined" else None}
    report = build_report(diag, prov, min_persistence=config.min_persistence,
                          infinite_policy=config.infinite_policy, dims=config.report_dims())
    return ChainAnalysis(cloud, dm, filt, diag, report)
