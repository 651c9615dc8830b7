"""Shipped configs and the small generator fixture used by the sparsity sweep.

The toy generator's weights are heavy-tailed random draws.  Its "ground
truth" is a Gaussian fitted to the unpruned generator's own outputs, so the
unpruned network sits close to, but not exactly on, the target
distribution.  Rebuilding the fixture is deterministic for a given seed and
numpy version; the shipped files are the reference copy.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from revdeconv.netio import NetworkConfig, load_config, load_weights, save_weights
from revdeconv.network import generate_outputs, noise_inputs, random_weights

CONFIG_NAMES = ("mnist_dcgan", "celeba_dcgan", "toy_generator")
TOY_WEIGHT_SCALE = 0.3
TOY_FIT_SAMPLES = 2048
TOY_TRUTH_SAMPLES = 512


def data_dir() -> Path:
    return Path(str(resources.files("revdeconv") / "configs"))


def config_path(name: str) -> Path:
    if name not in CONFIG_NAMES:
        raise KeyError(f"no shipped config {name!r}; have {', '.join(CONFIG_NAMES)}")
    return data_dir() / f"{name}.cfg"


def shipped_config(name: str) -> NetworkConfig:
    return load_config(config_path(name))


def toy_paths() -> tuple[Path, Path, Path]:
    d = data_dir()
    return d / "toy_generator.cfg", d / "toy_generator.rvdw", d / "toy_ground_truth.npy"


def load_toy_fixture():
    """(config, weights, ground_truth) as shipped."""
    cfg_path, w_path, gt_path = toy_paths()
    config = load_config(cfg_path)
    return config, load_weights(w_path, config), np.load(gt_path)


def build_toy_fixture(seed: int = 0):
    config = shipped_config("toy_generator")
    rng = np.random.default_rng(seed)
    weights = random_weights(config, rng, scale=TOY_WEIGHT_SCALE, heavy_tail=True)
    fit = generate_outputs(config, weights, noise_inputs(config, TOY_FIT_SAMPLES, rng))
    truth = rng.multivariate_normal(fit.mean(0), np.cov(fit.T), TOY_TRUTH_SAMPLES)
    return config, weights, truth


def write_toy_fixture(out_dir, seed: int = 0) -> tuple[Path, Path]:
    _, weights, truth = build_toy_fixture(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w_path, gt_path = out_dir / "toy_generator.rvdw", out_dir / "toy_ground_truth.npy"
    save_weights(w_path, weights)
    np.save(gt_path, truth)
    return w_path, gt_path
