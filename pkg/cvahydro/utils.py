import os
import json
import hashlib
import h5py
import numpy as np
import pandas as pd


__version__ = '0.1.0'

CHECKPOINT_FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Raised when a run configuration violates a precondition of the module that consumes it."""


class NumericalError(RuntimeError):
    """Raised when a solver cannot produce a trustworthy result (singular system, residual or positivity failure)."""


class AcceptanceError(AssertionError):
    """Raised in check mode when a measured quantity falls outside its acceptance band."""


def canonical_json(obj):
    """Serialize an object to a canonical JSON string.

    Keys are sorted and numpy scalars/arrays are converted to built-in types, so that two equal
    configurations always produce the same string.

    Args:
        obj: JSON-compatible object, possibly containing numpy values.

    Returns:
        str: Canonical JSON text.
    """
    return json.dumps(to_builtin(obj), sort_keys=True, separators=(',', ':'))


def to_builtin(obj):
    """Recursively convert numpy containers and scalars to built-in Python types.

    Args:
        obj: Nested structure of dicts, lists, tuples, numpy arrays and scalars.

    Returns:
        The same structure with only built-in types.
    """
    if isinstance(obj, dict):
        return {str(key): to_builtin(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def config_hash(config):
    """Hash a configuration for provenance records.

    Args:
        config (dict): Fully merged configuration.

    Returns:
        str: First 16 hex digits of the SHA-256 of the canonical JSON form.
    """
    return hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()[:16]


def provenance(config=None, seed=None, command=None):
    """Build the provenance record attached to every output file.

    Args:
        config (dict, optional): Merged configuration of the run.
        seed (int, optional): Random seed of the run.
        command (str, optional): Name of the workbench command.

    Returns:
        dict: Provenance fields (no timestamps, so repeated runs give identical files).
    """
    return {
        'tool_version': __version__,
        'config_hash': config_hash(config) if config is not None else None,
        'seed': seed,
        'command': command,
    }


def save_table(df, fpath, prov=None, fmt='csv'):
    """Write a table with a provenance header.

    CSV files start with ``# key: value`` comment lines followed by the column header; floats are
    written with 17 significant digits. JSON files hold ``{"provenance": ..., "rows": [...]}``.

    Args:
        df (pandas.DataFrame): Table to write.
        fpath (str): Output path; the extension is replaced according to ``fmt``.
        prov (dict, optional): Provenance record.
        fmt (str): 'csv' or 'json'.

    Returns:
        str: Path of the written file.
    """
    if fmt not in ('csv', 'json'):
        raise ValueError("Unsupported output format '{}'.".format(fmt))
    # Check and create the output directory
    out_dir = os.path.dirname(fpath)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    root, _ = os.path.splitext(fpath)
    fpath = root + '.' + fmt
    prov = prov if prov is not None else {}

    if fmt == 'csv':
        with open(fpath, 'w', newline='') as f:
            for key in sorted(prov):
                f.write('# {}: {}\n'.format(key, prov[key]))
            df.to_csv(f, index=False, float_format='%.17g', lineterminator='\n')
    else:
        payload = {'provenance': prov, 'rows': df.to_dict(orient='records')}
        save_json(payload, fpath)

    return fpath


def load_table(fpath):
    """Read a table written by :func:`save_table`.

    Args:
        fpath (str): Path of a CSV or JSON table.

    Returns:
        tuple: (pandas.DataFrame, dict) with the table and its provenance record.
    """
    if fpath.endswith('.json'):
        with open(fpath, 'r') as f:
            payload = json.load(f)
        return pd.DataFrame(payload['rows']), payload['provenance']

    # Parse the provenance lines at the top of the file
    prov = {}
    with open(fpath, 'r') as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, _, val = line[1:].strip().partition(': ')
            prov[key] = val
    df = pd.read_csv(fpath, comment='#')

    return df, prov


def save_json(payload, fpath):
    """Write a JSON document with sorted keys.

    Args:
        payload (dict): Document to write.
        fpath (str): Output path.
    """
    out_dir = os.path.dirname(fpath)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(fpath, 'w') as f:
        json.dump(to_builtin(payload), f, sort_keys=True, indent=2)
        f.write('\n')


def save_h5(fpath, datasets, attrs=None):
    """Save arrays into an HDF5 file as little-endian doubles.

    Args:
        fpath (str): Output path.
        datasets (dict): Mapping from dataset name to array.
        attrs (dict, optional): File-level attributes.
    """
    out_dir = os.path.dirname(fpath)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with h5py.File(fpath, 'w') as f:
        f.attrs['format_version'] = CHECKPOINT_FORMAT_VERSION
        for key, val in (attrs or {}).items():
            f.attrs[key] = val
        for name, arr in datasets.items():
            f.create_dataset(name, data=np.asarray(arr, dtype='<f8'))


def load_h5(fpath):
    """Load all datasets and attributes of an HDF5 file written by :func:`save_h5`.

    Args:
        fpath (str): Input path.

    Returns:
        tuple: (dict of arrays, dict of attributes).

    Raises:
        ValueError: If the file carries an unknown format version.
    """
    with h5py.File(fpath, 'r') as f:
        version = int(f.attrs.get('format_version', -1))
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValueError("Unsupported checkpoint format version {} in '{}'.".format(version, fpath))
        datasets = {name: np.asarray(f[name][()]) for name in f.keys()}
        attrs = {key: f.attrs[key] for key in f.attrs.keys()}

    return datasets, attrs
