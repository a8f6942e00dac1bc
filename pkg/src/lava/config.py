"""Model and training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    enc_layers: int = 2
    dec_layers: int = 2
    max_len: int = 64
    rel_k: int = 4
    dropout: float = 0.1
    ls: int = 1
    rs: int = 1
    va: bool = True
    va_readout: str = "sum"  # "vocab": last VA mixture only; "sum": hidden state + mixture
    cross_attention: bool = True
    max_delta: int = 20
    emb_std: float = 1.0
    ln_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("n_heads must divide d_model")
        if self.ls not in (0, 1) or self.rs not in (0, 1):
            raise ValueError(f"unsupported look-around sizes LS={self.ls} RS={self.rs}")
        if self.va_readout not in ("vocab", "sum"):
            raise ValueError(f"unknown va_readout {self.va_readout!r}")
        if self.vocab_size < 5:
            raise ValueError("vocabulary needs at least 5 entries")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def n_length_classes(self) -> int:
        return 2 * self.max_delta + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    @classmethod
    def transformer_base(cls, vocab_size: int) -> ModelConfig:
        """Transformer-Base sizes (6 layers, 512/2048, 8 heads)."""
        return cls(vocab_size=vocab_size, d_model=512, n_heads=8, d_ff=2048,
                   enc_layers=6, dec_layers=6, max_len=256)


@dataclass
class LambdaSchedule:
    kind: str = "linear"  # "constant" | "linear"
    value: float = 0.1
    epochs: int = 5

    def __call__(self, epoch: float) -> float:
        return lambda_schedule(self, epoch)


def lambda_schedule(spec: LambdaSchedule, epoch: float) -> float:
    """BOW weight at a given epoch."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    if spec.kind == "constant":
        return spec.value
    if spec.kind == "linear":
        if spec.epochs <= 0:
            return spec.value
        return spec.value * min(1.0, epoch / spec.epochs)
    raise ValueError(f"unknown lambda schedule kind {spec.kind!r}")


SAMPLING_MODES = ("tf", "ss", "dss")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    warmup_steps: int = 200
    weight_decay: float = 0.0
    label_smoothing: float = 0.1
    alpha: float = 10.0
    sampling: str = "dss"
    ss_min_prob: float = 0.5
    bow: bool = True
    lambda_kind: str = "linear"
    lambda_value: float = 0.1
    lambda_epochs: int = 5
    avg_best: int = 5
    seed: int = 0
    use_kd: bool = False
    init_encoder_from_teacher: bool = False
    max_steps: int | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label smoothing must lie in [0, 1)")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
        if self.lambda_value < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def lambda_spec(self) -> LambdaSchedule:
        return LambdaSchedule(self.lambda_kind, self.lambda_value if self.bow else 0.0,
                              self.lambda_epochs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
