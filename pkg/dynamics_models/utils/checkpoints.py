"""
Model checkpoints on top of the neural checkpoint format. The header
metadata records the model kind, step size and feature codec next to the
training metadata, so a file fully reconstructs its ModelParams.
"""

import logging

from dynamics_models.utils.features import FeatureCodec, check_kind
from dynamics_models.utils.interaction_network import ModelParams
from neural.exceptions import CheckpointFormatError
from neural.utils.checkpoint import load_checkpoint, save_checkpoint
from neural.utils.mlp import MlpParams

logger = logging.getLogger(__name__)


def save_model(path, params: ModelParams):
    """Write params to ``path`` and return the file's sha256."""
    metadata = {
        'kind': params.kind,
        'dt': params.dt,
        'codec': params.codec.to_dict(),
        'model': params.metadata,
    }
    digest = save_checkpoint(path, params.blocks(), metadata)
    logger.info(f"Saved {params.kind} checkpoint to {path} ({params.n_parameters()} parameters)")
    return digest


def load_model(path) -> ModelParams:
    blocks, metadata = load_checkpoint(path)
    try:
        kind = check_kind(metadata['kind'])
        codec = FeatureCodec.from_dict(metadata['codec'])
        f_rel = MlpParams.from_blocks({k[len('f_rel.'):]: v for k, v in blocks.items() if k.startswith('f_rel.')})
        f_dyn = MlpParams.from_blocks({k[len('f_dyn.'):]: v for k, v in blocks.items() if k.startswith('f_dyn.')})
        return ModelParams(
            kind=kind, f_rel=f_rel, f_dyn=f_dyn, codec=codec,
            dt=float(metadata['dt']), metadata=metadata.get('model', {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"{path} is not a model checkpoint: {e}") from e
