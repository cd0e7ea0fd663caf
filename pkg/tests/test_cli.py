from dataclasses import astuple

import numpy as np
import pytest

from ddis.bench import SyntheticParams, read_manifest, render_pair
from ddis.cli import build_parser, main
from ddis.features import (FeatureGrid, extract_patch_features, PatchSpec, save_feature_map,
                           save_image)


@pytest.fixture
def pair(tmp_path):
    src, trect, tgt, grect = render_pair(SyntheticParams(size=48, template_size=14, seed=5), 0)
    save_image(tmp_path / "s.ppm", tgt)
    crop = tgt[grect.y:grect.y + grect.h, grect.x:grect.x + grect.w]
    save_image(tmp_path / "t.ppm", crop)
    return tmp_path, grect, tgt, crop


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestMatch:
    def test_self_match_writes_planted_rect(self, pair, capsys):
        d, grect, _, _ = pair
        code, _, _ = run(["match", "--template", d / "t.ppm", "--target", d / "s.ppm",
                          "--measure", "ddis", "--rect-out", d / "r.txt"], capsys)
        assert code == 0
        x, y, w, h, score = (d / "r.txt").read_text().split()
        assert (int(x), int(y), int(w), int(h)) == astuple(grect)
        assert float(score) == 1.0

    def test_template_rect_crop(self, pair, capsys):
        d, grect, _, _ = pair
        r = ",".join(map(str, astuple(grect)))
        code, out, _ = run(["match", "--template", d / "s.ppm", "--template-rect", r,
                            "--target", d / "s.ppm", "--exact-nn"], capsys)
        assert code == 0
        assert tuple(map(int, out.split()[:4])) == astuple(grect)

    def test_bbs_guard_exit(self, pair, capsys):
        d, *_ = pair
        code, _, err = run(["match", "--template", d / "t.ppm", "--target", d / "s.ppm",
                            "--measure", "bbs", "--bbs-guard", "100"], capsys)
        assert code == 1
        assert "guard" in err and err.count("\n") == 1

    def test_fmap_bypasses_patches(self, pair, capsys):
        d, grect, tgt, crop = pair
        spec = PatchSpec()
        s = extract_patch_features(tgt, spec)
        t = extract_patch_features(crop, spec)
        save_feature_map(d / "s.fmap", s)
        save_feature_map(d / "t.fmap", t)
        code, out, _ = run(["match", "--features", "fmap", "--template-features", d / "t.fmap",
                            "--target-features", d / "s.fmap", "--exact-nn",
                            "--map-csv", d / "m.csv", "--map-pgm", d / "m.pgm"], capsys)
        assert code == 0
        # loaded grids have no origin offset, so the rect is in grid cells
        x, y, w, h = map(int, out.split()[:4])
        assert (x, y) == (grect.x, grect.y)
        assert (w, h) == (t.width, t.height)
        rows = (d / "m.csv").read_text().splitlines()
        assert len(rows) == s.height - t.height + 1
        assert (d / "m.pgm").read_bytes().startswith(b"P5")

    def test_fmap_missing_path(self, capsys):
        code, _, err = run(["match", "--features", "fmap"], capsys)
        assert code == 1 and "fmap" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["match", "--template", tmp_path / "no.ppm", "--target", tmp_path / "no.ppm"],
                           capsys)
        assert code == 1 and err.startswith("ddis match: error:")

    def test_bad_magic(self, tmp_path, capsys):
        (tmp_path / "x.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
        code, _, err = run(["match", "--template", tmp_path / "x.ppm", "--target", tmp_path / "x.ppm"],
                           capsys)
        assert code == 1


class TestSimulate:
    def test_dis_argmax(self, capsys):
        code, out, _ = run(["simulate", "--measure", "dis", "--mu", "0:10:1", "--sigma", "0:10:1",
                            "--n", "100", "--trials", "200", "--seed", "7"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 12
        vals = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
        assert vals.shape == (11, 11)
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        assert abs(i - 0) <= 1 and abs(j - 1) <= 1

    def test_bad_range(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["simulate", "--mu", "0:10"])
        assert e.value.code == 2

    def test_out_file(self, tmp_path, capsys):
        code, out, _ = run(["simulate", "--mu", "0", "--sigma", "1:2:1", "--n", "10", "--trials", "5",
                            "--out", tmp_path / "g.csv"], capsys)
        assert code == 0 and out == ""
        assert (tmp_path / "g.csv").read_text().count("\n") == 2


class TestBenchGen:
    def test_gen_then_bench(self, tmp_path, capsys):
        code, _, _ = run(["gen", "--out-dir", tmp_path / "d", "--count", "4", "--size", "48",
                          "--template-size", "12", "--occlusion", "0.3", "--seed", "1"], capsys)
        assert code == 0
        recs = read_manifest(tmp_path / "d" / "manifest.csv")
        assert len(recs) == 4
        code, out, _ = run(["bench", "--manifest", tmp_path / "d" / "manifest.csv",
                            "--measure", "ddis,dis,ssd", "--out-dir", tmp_path / "o"], capsys)
        assert code == 0
        rows = (tmp_path / "o" / "results.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 4 * 3
        assert [ln.split()[1] for ln in out.strip().splitlines()] == ["ddis", "dis", "ssd"]
        curve = (tmp_path / "o" / "success_curve.csv").read_text().splitlines()
        assert curve[0] == "threshold,ddis,dis,ssd" and len(curve) == 102

    def test_gen_deterministic(self, tmp_path, capsys):
        for name in "ab":
            run(["gen", "--out-dir", tmp_path / name, "--count", "2", "--size", "40",
                 "--template-size", "10", "--noise", "10/255", "--seed", "3"], capsys)
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_unknown_measure(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["bench", "--manifest", "m.csv", "--measure", "ddis,xyz"])
        assert e.value.code == 2

    def test_missing_manifest(self, tmp_path, capsys):
        code, _, err = run(["bench", "--manifest", tmp_path / "m.csv"], capsys)
        assert code == 1 and err.startswith("ddis bench: error:")


class TestParser:
    @pytest.mark.parametrize("cmd,flags", [
        ("match", ["--template", "--target", "--template-rect", "--features", "--template-features",
                   "--target-features", "--measure", "--rect-out", "--map-csv", "--map-pgm",
                   "--exact-nn", "--epsilon", "--reduced-dim", "--propagation", "--no-smoothing",
                   "--patch-size", "--color-space", "--bbs-guard", "--workers", "--seed"]),
        ("simulate", ["--measure", "--mode", "--mu", "--sigma", "--p-mu", "--p-sigma", "--n", "--m",
                      "--trials", "--seed", "--out", "--workers"]),
        ("bench", ["--manifest", "--measure", "--out-dir", "--timing", "--workers", "--exact-nn"]),
        ("gen", ["--out-dir", "--count", "--size", "--template-size", "--occlusion", "--noise",
                 "--jitter", "--shift", "--seed"]),
    ])
    def test_help_lists_flags(self, cmd, flags, capsys):
        with pytest.raises(SystemExit) as e:
            main([cmd, "--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        for f in flags:
            assert f in out

    @pytest.mark.parametrize("cmd", ["match", "simulate", "bench", "gen"])
    def test_unknown_flag_fails(self, cmd, capsys):
        with pytest.raises(SystemExit) as e:
            main([cmd, "--bogus"])
        assert e.value.code == 2

    def test_defaults(self):
        a = build_parser().parse_args(["match"])
        assert a.measure == "ddis" and a.epsilon == 2.0 and a.reduced_dim == 9 and a.seed == 0
