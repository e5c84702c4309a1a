"""Shared checks used by unit and acceptance tests."""
import shutil

import numpy as np

from splicenet import imaging
from splicenet.evaluation import run_cv, stratified_group_kfold
from splicenet.model_io import to_bytes
from splicenet.pipeline import extract_features


def perturb_images(src_root, dst_root, image_ids, seed=0):
    """Copy a dataset and add visible noise to the listed images only."""
    shutil.copytree(src_root, dst_root)
    rng = np.random.default_rng(seed)
    for iid in image_ids:
        path = dst_root / iid
        img = imaging.load_image(path)
        noisy = np.clip(img + rng.normal(0, 0.08, img.shape), 0, 1)
        imaging.save_png(noisy, path)


def leakage_check(root, tmp_dir, cfg, k, seed, fold=0):
    """Perturb the pixels of one test fold and compare that fold's fitted bundle.

    Returns ``(bundle_identical, test_features_changed)``.
    """
    records = imaging.load_dataset(root)
    table = extract_features(records, cfg)
    folds = stratified_group_kfold(table.image_label, table.image_ids, k, seed)
    test_ids = [table.image_ids[i] for i in np.flatnonzero(folds == fold)]
    perturbed_root = tmp_dir / "perturbed"
    perturb_images(root, perturbed_root, test_ids)
    table2 = extract_features(imaging.load_dataset(perturbed_root), cfg)
    rows = table.rows(np.flatnonzero(folds == fold))
    changed = not np.array_equal(table.features[rows], table2.features[rows])
    sink1, sink2 = [], []
    run_cv(table, cfg, k, seed, fitted_sink=sink1)
    run_cv(table2, cfg, k, seed, fitted_sink=sink2)
    same = to_bytes(sink1[fold].bundle) == to_bytes(sink2[fold].bundle)
    return same, changed
