"""
Checkpoint Files
================
Layout: 8-byte little-endian header length, UTF-8 JSON header, then every
parameter block as little-endian float64 in header order. The header lists
each block's name, shape and element offset and carries arbitrary metadata
(seeds, standardizers, training-config echo, loss curves).
"""

import hashlib
import json
import logging
import struct
from pathlib import Path

import numpy as np

from neural.exceptions import CheckpointFormatError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'pushlab-checkpoint'
CHECKPOINT_VERSION = 1
_LENGTH = struct.Struct('<Q')


def encode_checkpoint(blocks, metadata=None):
    """Serialize named blocks and metadata to bytes."""
    entries, offset = [], 0
    for name, value in blocks.items():
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise CheckpointFormatError(f"Block '{name}' has non-finite values")
        entries.append({'name': name, 'shape': list(value.shape), 'offset': offset})
        offset += value.size

    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'blocks': entries,
        'metadata': metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':'), allow_nan=False).encode('utf-8')
    blob = b''.join(np.asarray(v, dtype='<f8').tobytes() for v in blocks.values())
    return _LENGTH.pack(len(header_bytes)) + header_bytes + blob


def decode_checkpoint(data):
    """
    Parse checkpoint bytes.

    Returns:
        tuple: (blocks dict name -> array, metadata dict)
    """
    if len(data) < _LENGTH.size:
        raise CheckpointFormatError("Checkpoint is shorter than its length prefix")
    (length,) = _LENGTH.unpack_from(data)
    if len(data) < _LENGTH.size + length:
        raise CheckpointFormatError("Checkpoint header is truncated")
    try:
        header = json.loads(data[_LENGTH.size:_LENGTH.size + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"Checkpoint header is not valid JSON: {e}") from e
    if header.get('format') != CHECKPOINT_FORMAT or header.get('version') != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"Unsupported checkpoint format {header.get('format')!r} version {header.get('version')!r}"
        )

    flat = np.frombuffer(data[_LENGTH.size + length:], dtype='<f8')
    blocks = {}
    for entry in header['blocks']:
        size = int(np.prod(entry['shape'])) if entry['shape'] else 1
        start = entry['offset']
        if start + size > flat.size:
            raise CheckpointFormatError(f"Checkpoint blob is truncated inside block '{entry['name']}'")
        blocks[entry['name']] = flat[start:start + size].astype(np.float64).reshape(entry['shape'])
    return blocks, header.get('metadata', {})


def save_checkpoint(path, blocks, metadata=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(blocks, metadata)
    path.write_bytes(data)
    logger.info(f"Saved checkpoint {path} ({len(blocks)} blocks)")
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
