import numpy as np
import pytest

from splicenet import imaging
from splicenet.pipeline import PipelineConfig, extract_features
from splicenet.siamese import TrainConfig
from splicenet.synthgen import SynthConfig, generate_dataset

ACCEPTANCE_LINES = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SMALL_SYNTH = SynthConfig(n_authentic=10, n_tampered=10, size=128, seed=5, region_size=(40, 64))


def small_pipeline_config(seed=5, **over):
    train = TrainConfig(max_epochs=40, patience=8, pairs_per_epoch=512, val_pairs=256, seed=seed)
    return PipelineConfig(train=train, **over)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("small") / "data"
    generate_dataset(SMALL_SYNTH, root)
    return root


@pytest.fixture(scope="session")
def small_records(small_dataset):
    return imaging.load_dataset(small_dataset)


@pytest.fixture(scope="session")
def small_table(small_records):
    return extract_features(small_records, small_pipeline_config())


@pytest.fixture(scope="session")
def small_fit(small_table):
    from splicenet.pipeline import fit_bundle, validation_split
    cfg = small_pipeline_config()
    n = small_table.n_images
    fit_imgs, val_imgs = validation_split(small_table.image_label, np.arange(n), 0.2, cfg.train.seed)
    return fit_bundle(small_table, fit_imgs, val_imgs, cfg)
