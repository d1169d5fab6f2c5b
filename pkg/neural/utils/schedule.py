from dataclasses import dataclass


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    decay_factor: float = 0.5
    decay_every: int = 2500
    iterations: int = 10000
    batch_size: int = 100
    l2_lambda: float = 1e-3
    rollout_length: int = 200
    seed: int = 0
    # multiplies the squared-meter data term before the regularizer is added
    error_weight: float = 1e6
    clip_norm: float = 5.0
    log_every: int = 100
    validation_fraction: float = 0.1
    fine_tune_lr_scale: float = 0.1
    fine_tune_iterations: int = 2500

    def __post_init__(self):
        positive = ('lr0', 'decay_factor', 'decay_every', 'batch_size', 'rollout_length',
                    'error_weight', 'clip_norm', 'log_every', 'fine_tune_lr_scale')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"TrainConfig.{name} must be positive, got {getattr(self, name)}")
        for name in ('iterations', 'fine_tune_iterations', 'seed'):
            if getattr(self, name) < 0:
                raise ValueError(f"TrainConfig.{name} must be non-negative, got {getattr(self, name)}")
        if self.l2_lambda < 0:
            raise ValueError(f"TrainConfig.l2_lambda must be non-negative, got {self.l2_lambda}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(f"TrainConfig.validation_fraction must lie in [0, 1), got {self.validation_fraction}")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"Unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def lr_at(cfg: TrainConfig, iteration):
    """
    Step-decay learning rate: lr0 * decay_factor ** floor(iteration / decay_every).

    Example:
        >>> lr_at(TrainConfig(), 7500)
        0.000125
    """
    if iteration < 0:
        raise ValueError(f"iteration must be non-negative, got {iteration}")
    return cfg.lr0 * cfg.decay_factor ** (int(iteration) // int(cfg.decay_every))
