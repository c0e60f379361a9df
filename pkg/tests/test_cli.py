"""Command-line interface: verbs, flags, exit codes, determinism."""

import pytest

from photovo.cli import main


@pytest.fixture(scope="module")
def ds_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_ds")
    rc = main(
        [
            "render-synthetic",
            "--out",
            str(root),
            "--frames",
            "25",
            "--width",
            "128",
            "--height",
            "96",
            "--conditions",
            "static,global",
        ]
    )
    assert rc == 0
    return root


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "pipeline.ini"
    p.write_text(
        "[tracker]\nmin_selected_pixels = 100\n\n"
        "[keyframes]\ntranslation_threshold = 0.2\nrotation_threshold_deg = 8.0\n"
    )
    return p


def test_render_synthetic_layout(ds_root):
    assert (ds_root / "calibration.txt").is_file()
    assert (ds_root / "groundtruth.txt").is_file()
    assert len(list((ds_root / "static" / "rgb").glob("*.png"))) == 25
    assert (ds_root / "global" / "affine.txt").is_file()


def test_render_rejects_unknown_condition(tmp_path):
    assert main(["render-synthetic", "--out", str(tmp_path / "x"), "--conditions", "nonsense"]) == 1


def test_vo_and_reports(ds_root, config_file, tmp_path):
    out = tmp_path / "run"
    rc = main(
        [
            "vo",
            "--dataset",
            str(ds_root),
            "--condition",
            "static",
            "--config",
            str(config_file),
            "--out",
            str(out),
            "--save-map",
            str(tmp_path / "map"),
        ]
    )
    assert rc == 0
    assert (out / "summary.csv").is_file()
    assert (out / "frames.csv").is_file()
    assert (tmp_path / "map" / "manifest.txt").is_file()


def test_vo_byte_identical_reports(ds_root, config_file, tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        rc = main(
            ["vo", "--dataset", str(ds_root), "--condition", "static", "--config", str(config_file), "--out", str(out)]
        )
        assert rc == 0
        outs.append(out)
    for fname in ("summary.csv", "frames.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_vo_missing_dataset_exit_code():
    assert main(["vo", "--dataset", "/nonexistent/place", "--condition", "static"]) == 1


def test_vo_bad_transform_spec(ds_root):
    assert main(["vo", "--dataset", str(ds_root), "--condition", "static", "--transform", "bogus"]) == 1


def test_reloc_flow(ds_root, config_file, tmp_path):
    map_dir = tmp_path / "map"
    rc = main(
        [
            "vo",
            "--dataset",
            str(ds_root),
            "--condition",
            "static",
            "--config",
            str(config_file),
            "--save-map",
            str(map_dir),
        ]
    )
    assert rc == 0
    out = tmp_path / "reloc_run"
    rc = main(
        [
            "reloc",
            "--dataset",
            str(ds_root),
            "--condition",
            "static",
            "--map",
            str(map_dir),
            "--config",
            str(config_file),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert (out / "summary.csv").is_file()
    # Exact per-frame correction restores tracking under the affine condition.
    rc = main(
        [
            "reloc",
            "--dataset",
            str(ds_root),
            "--condition",
            "global",
            "--map",
            str(map_dir),
            "--config",
            str(config_file),
            "--transform",
            f"affine-file:{ds_root / 'global' / 'affine.txt'}",
        ]
    )
    assert rc == 0


def test_reloc_missing_map(ds_root):
    assert main(["reloc", "--dataset", str(ds_root), "--condition", "static", "--map", "/nonexistent"]) == 1


def test_reloc_initial_pose_flag(ds_root, config_file, tmp_path):
    map_dir = tmp_path / "map"
    main(["vo", "--dataset", str(ds_root), "--condition", "static", "--config", str(config_file), "--save-map", str(map_dir)])
    rc = main(
        [
            "reloc",
            "--dataset",
            str(ds_root),
            "--condition",
            "static",
            "--map",
            str(map_dir),
            "--config",
            str(config_file),
            "--initial-pose",
            "0,0,0,0,0,0,1",
        ]
    )
    assert rc == 0


def test_make_affine(ds_root):
    rc = main(
        ["make-affine", "--dataset", str(ds_root), "--source", "static", "--params", "light:1.5,0.1", "dark:0.8,-0.2"]
    )
    assert rc == 0
    assert (ds_root / "light" / "rgb").is_dir()
    assert (ds_root / "dark" / "affine.txt").is_file()


def test_eval_and_plot_data(ds_root, config_file, tmp_path):
    out = tmp_path / "run"
    main(["vo", "--dataset", str(ds_root), "--condition", "static", "--config", str(config_file), "--out", str(out)])
    rc = main(["eval", "--run", str(out), "--groundtruth", str(ds_root / "groundtruth.txt"), "--out", str(tmp_path / "ev")])
    assert rc == 0
    assert (tmp_path / "ev" / "summary.csv").is_file()
    rc = main(
        [
            "export-plot-data",
            "--run",
            str(out),
            "--groundtruth",
            str(ds_root / "groundtruth.txt"),
            "--out",
            str(tmp_path / "plot.csv"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "plot.csv").read_text().startswith("cum_gt_distance_m")


def test_eval_missing_run(tmp_path):
    assert main(["eval", "--run", str(tmp_path), "--groundtruth", str(tmp_path / "gt.txt")]) == 1
