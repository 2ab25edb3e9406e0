"""Shared fixtures: a small unit-test dataset and the session-scoped end-to-end
training pipeline used by the acceptance tests."""

import dataclasses
import time
from pathlib import Path

import pytest

from prosona.data import DatasetConfig, GenerationConfig, default_styles, generate_dataset, load_manifest
from prosona.train import TrainConfig, train_stage1, train_stage2

# acceptance-scale setup: 2 styles (erosion -2 / dilation +2), 200 cases, 64x64
E2E_DATASET = dict(n_cases=200, seed=7, size=64)
E2E_STAGE1 = dict(epochs=25, learning_rate=1e-3, batch_size=8, k_samples=10,
                  latent_dim=6, base_width=8, seed=0)
E2E_STAGE2 = dict(epochs=30, learning_rate=1e-2, weight_decay=1e-2, batch_size=8,
                  k_samples=10, latent_dim=6, base_width=8, seed=0,
                  alpha=1.0, beta=1.0, tau=0.1)


def make_dataset(out_dir: Path, n_cases: int, seed: int, size: int, n_annotators: int = 2,
                 jitter: float | None = None, cases_per_family: int = 5) -> Path:
    cfg = DatasetConfig(
        n_cases=n_cases, seed=seed, cases_per_family=cases_per_family,
        generation=GenerationConfig(height=size, width=size),
        styles=tuple(default_styles(n_annotators, boundary_jitter=jitter)),
    )
    generate_dataset(cfg, out_dir)
    return out_dir


@pytest.fixture(scope="session")
def unit_dataset(tmp_path_factory) -> Path:
    """Small 32x32 dataset for plumbing tests (12 cases, 2 annotators)."""
    return make_dataset(tmp_path_factory.mktemp("unit_ds"), n_cases=12, seed=3, size=32,
                        cases_per_family=2)


@pytest.fixture(scope="session")
def quad_dataset(tmp_path_factory) -> Path:
    """Four-annotator 32x32 dataset (nested styles -2, 0, +2, +4)."""
    return make_dataset(tmp_path_factory.mktemp("quad_ds"), n_cases=12, seed=5, size=32,
                        n_annotators=4, cases_per_family=2)


@pytest.fixture(scope="session")
def e2e_pipeline(tmp_path_factory):
    """Full synthetic pipeline: datagen -> stage 1 -> stage 2 (alpha=beta=1).

    Returns paths plus wall-clock timings; the acceptance tests assert quality
    and runtime against this single shared run.
    """
    root = tmp_path_factory.mktemp("e2e")
    data_dir = root / "data"
    timings = {}

    t0 = time.time()
    make_dataset(data_dir, **E2E_DATASET)
    timings["datagen"] = time.time() - t0

    t0 = time.time()
    s1_cfg = TrainConfig(stage=1, data_dir=str(data_dir), out_dir=str(root / "s1"), **E2E_STAGE1)
    s1 = train_stage1(s1_cfg)
    timings["stage1"] = time.time() - t0

    t0 = time.time()
    s2_cfg = TrainConfig(stage=2, data_dir=str(data_dir), out_dir=str(root / "s2"),
                         stage1_checkpoint=str(s1.best_dir), **E2E_STAGE2)
    s2 = train_stage2(s2_cfg)
    timings["stage2"] = time.time() - t0

    return {
        "data_dir": data_dir,
        "manifest": load_manifest(data_dir),
        "stage1": s1,
        "stage2": s2,
        "stage1_cfg": s1_cfg,
        "stage2_cfg": s2_cfg,
        "timings": timings,
        "root": root,
    }


@pytest.fixture(scope="session")
def e2e_stage2_plain(e2e_pipeline):
    """Stage-2 retrained with alpha = beta = 0 on the same stage-1 space, for
    the contrastive-benefit comparison."""
    root = e2e_pipeline["root"]
    cfg = dataclasses.replace(
        e2e_pipeline["stage2_cfg"], alpha=0.0, beta=0.0, out_dir=str(root / "s2_plain")
    )
    return train_stage2(cfg)


_CRITERION_LINES: list[str] = []


def write_criterion(name: str, passed: bool, detail: str = "") -> None:
    """One visible pass/fail line per acceptance criterion."""
    status = "PASS" if passed else "FAIL"
    line = f"[acceptance] {status} {name}" + (f" ({detail})" if detail else "")
    print(line)
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter) -> None:
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
