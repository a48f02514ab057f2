import os
import glob
import json
import pickle
import re
import hashlib
import platform
from importlib import metadata

import numpy as np
import jax
import optax

from tensorboardX import SummaryWriter


class TensorboardWriter:
    """Context manager yielding (SummaryWriter, run_dir) for one fit, or (None, None) when logging is off.

    Runs of the same fit label are numbered <label>_1, <label>_2, ... inside the log directory.
    """
    def __init__(self, log_dir, run_label, new_run=True):
        self.log_dir = log_dir
        self.run_label = run_label
        self.new_run = new_run
        self.writer = None

    def __enter__(self):
        if self.log_dir is None:
            return None, None
        run_id = self._last_run_id() + (1 if self.new_run else 0)
        run_dir = os.path.join(self.log_dir, "{}_{}".format(self.run_label, max(run_id, 1)))
        self.writer = SummaryWriter(run_dir)
        return self.writer, run_dir

    def _last_run_id(self):
        pattern = re.compile(re.escape(self.run_label) + r"_(\d+)$")
        ids = [int(m.group(1)) for m in (pattern.match(os.path.basename(p))
                                         for p in glob.glob(os.path.join(self.log_dir, self.run_label + "_*"))) if m]
        return max(ids, default=0)

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.writer is not None:
            self.writer.flush()
            self.writer.close()
            self.writer = None


def save(ckpt_dir: str, state) -> None:
    """Checkpoint a pytree of arrays: leaves in leaves.npz, structure in treedef.pkl."""
    os.makedirs(ckpt_dir, exist_ok=True)
    leaves, treedef = jax.tree_util.tree_flatten(state)
    np.savez(os.path.join(ckpt_dir, "leaves.npz"), *[np.asarray(x) for x in leaves])
    with open(os.path.join(ckpt_dir, "treedef.pkl"), "wb") as f:
        pickle.dump(jax.tree_util.tree_unflatten(treedef, [None] * len(leaves)), f)

def restore(ckpt_dir):
    with open(os.path.join(ckpt_dir, "treedef.pkl"), "rb") as f:
        skeleton = pickle.load(f)
    treedef = jax.tree_util.tree_structure(skeleton, is_leaf=lambda x: x is None)
    with np.load(os.path.join(ckpt_dir, "leaves.npz")) as arrays:
        leaves = [arrays["arr_{}".format(i)] for i in range(treedef.num_leaves)]
    return jax.tree_util.tree_unflatten(treedef, leaves)

def select_optimizer(optim_str, lr, eps=1e-8, grad_max=100.0):
    # b1=0.9, b2=0.999 are the optax defaults
    if optim_str == 'adam':
        return optax.adam(lr, eps=eps)
    elif optim_str == 'adam_clip':
        return optax.chain(optax.clip_by_global_norm(grad_max), optax.adam(lr, eps=eps))
    raise ValueError("unknown optimizer '{}', expected 'adam' or 'adam_clip'".format(optim_str))

def file_digest(path):
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()

def package_versions(names=("climact", "jax", "jaxlib", "dm-haiku", "optax", "numpy", "pandas")):
    versions = {"python": platform.python_version()}
    for name in names:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions

def write_manifest(out_dir, command, config, seed, inputs=()):
    """Everything needed to rerun a command bit-identically; no timestamps."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": package_versions(),
        "inputs": {os.path.basename(p): file_digest(p) for p in sorted(inputs) if os.path.exists(p)},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
    return path
