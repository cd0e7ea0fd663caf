import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddis.bench import (PairRecord, Rect, SyntheticParams, auc, gen_dataset, gen_synthetic, iou,
                        read_manifest, render_pair, run_bench, run_pair, success_curve,
                        write_manifest)
from ddis.errors import InputError
from ddis.features import load_image, save_image
from ddis.matcher import MatcherConfig

rects = st.builds(Rect, st.integers(-20, 20), st.integers(-20, 20), st.integers(1, 30), st.integers(1, 30))


def pixel_iou(a, b):
    pa = {(x, y) for x in range(a.x, a.x + a.w) for y in range(a.y, a.y + a.h)}
    pb = {(x, y) for x in range(b.x, b.x + b.w) for y in range(b.y, b.y + b.h)}
    return len(pa & pb) / len(pa | pb)


class TestIoU:
    def test_identical(self):
        assert iou(Rect(3, 4, 5, 6), Rect(3, 4, 5, 6)) == 1.0

    def test_disjoint(self):
        assert iou(Rect(0, 0, 5, 5), Rect(5, 0, 5, 5)) == 0.0

    def test_half_overlap(self):
        assert iou(Rect(0, 0, 10, 10), Rect(5, 0, 10, 10)) == pytest.approx(1 / 3)

    @given(rects, rects)
    def test_symmetric_and_pixel_exact(self, a, b):
        assert iou(a, b) == iou(b, a)
        assert iou(a, b) == pytest.approx(pixel_iou(a, b))
        assert iou(a, a) == 1.0

    def test_invalid_rect(self):
        with pytest.raises(InputError):
            Rect(0, 0, 0, 3)


class TestSuccessCurve:
    def test_all_perfect(self):
        c = success_curve([1.0] * 7)
        assert np.all(c.fractions[:-1] == 1) and c.fractions[-1] == 0
        assert auc(c) == pytest.approx(100 / 101)

    def test_all_zero(self):
        assert auc(success_curve([0.0, 0.0])) == 0.0

    def test_two_values(self):
        c = success_curve([0.2, 0.8])
        t = c.thresholds
        assert np.all(c.fractions[t < 0.2] == 1.0)
        assert np.all(c.fractions[(t >= 0.2) & (t < 0.8)] == 0.5)
        assert np.all(c.fractions[t >= 0.8] == 0.0)
        # 20 thresholds at 1, 60 at 0.5 -> 50 / 101
        assert auc(c) == pytest.approx(50 / 101)
        assert auc(c) == pytest.approx(0.50, abs=0.01)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
    def test_monotone_and_bounded(self, accs):
        c = success_curve(accs)
        assert np.all(np.diff(c.fractions) <= 0)
        assert 0 <= auc(c) <= 1

    def test_empty(self):
        with pytest.raises(InputError):
            success_curve([])


def test_manifest_round_trip(tmp_path):
    recs = [PairRecord("a.ppm", Rect(1, 2, 3, 4), "b.ppm", Rect(5, 6, 3, 4)),
            PairRecord("c d.ppm", Rect(0, 0, 9, 9), "e,f.ppm", Rect(2, 2, 9, 9))]
    write_manifest(tmp_path / "m.csv", recs)
    assert read_manifest(tmp_path / "m.csv") == recs
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "template_image,tx,ty,tw,th,target_image,gx,gy,gw,gh"


def test_manifest_bad_header(tmp_path):
    (tmp_path / "m.csv").write_text("a,b\n")
    with pytest.raises(InputError):
        read_manifest(tmp_path / "m.csv")


class TestRunPair:
    def test_self_match(self, tmp_path, rng):
        img = (rng.random((40, 40, 3)) * 255).astype(np.uint8)
        save_image(tmp_path / "s.ppm", img)
        rec = PairRecord("s.ppm", Rect(10, 12, 15, 11), "s.ppm", Rect(10, 12, 15, 11))
        res, acc = run_pair(rec, MatcherConfig(ann=None), tmp_path)
        assert acc == 1.0 and res.rect == (10, 12, 15, 11)

    def test_truth_outside_image(self, tmp_path, rng):
        save_image(tmp_path / "s.ppm", np.zeros((20, 20, 3), np.uint8))
        rec = PairRecord("s.ppm", Rect(0, 0, 5, 5), "s.ppm", Rect(18, 0, 5, 5))
        with pytest.raises(InputError, match="s.ppm"):
            run_pair(rec, MatcherConfig(), tmp_path)

    def test_missing_file_names_record(self, tmp_path):
        rec = PairRecord("nope.ppm", Rect(0, 0, 5, 5), "s.ppm", Rect(0, 0, 5, 5))
        with pytest.raises(InputError, match="nope.ppm"):
            run_pair(rec, MatcherConfig(), tmp_path)


class TestSynthetic:
    def test_clean_copy(self, tmp_path):
        p = SyntheticParams(size=64, template_size=16, seed=3)
        src, tr, tgt, gr = render_pair(p, 0)
        assert np.array_equal(src[tr.y:tr.y + 16, tr.x:tr.x + 16], tgt[gr.y:gr.y + 16, gr.x:gr.x + 16])
        rec = gen_synthetic(p, tmp_path, 0)
        _, acc = run_pair(rec, MatcherConfig(measure="ddis"), tmp_path)
        assert acc == 1.0

    def test_deterministic_files(self, tmp_path):
        p = SyntheticParams(occlusion_fraction=0.3, noise_sigma=10 / 255, local_jitter=2, seed=9)
        a = gen_dataset(p, tmp_path / "a", 3)
        b = gen_dataset(p, tmp_path / "b", 3)
        assert a == b
        for name in ["manifest.csv"] + [r.template_image for r in a] + [r.target_image for r in a]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_stress_pair_geometry(self):
        p = SyntheticParams(size=80, template_size=20, occlusion_fraction=0.3,
                            noise_sigma=10 / 255, local_jitter=2, seed=1)
        for i in range(5):
            src, tr, tgt, gr = render_pair(p, i)
            assert tr.inside(80, 80) and gr.inside(80, 80)
            assert abs(gr.x - tr.x) <= 20 and abs(gr.y - tr.y) <= 20

    def test_bad_sizes(self):
        with pytest.raises(InputError):
            render_pair(SyntheticParams(size=20, template_size=20))

    def test_run_bench_order(self, tmp_path):
        recs = gen_dataset(SyntheticParams(size=48, template_size=12, seed=2), tmp_path, 3)
        rows = run_bench(recs, ["ddis", "ssd"], MatcherConfig(ann=None), tmp_path, timing=False)
        assert [(r["pair_index"], r["measure"]) for r in rows] == [
            (0, "ddis"), (0, "ssd"), (1, "ddis"), (1, "ssd"), (2, "ddis"), (2, "ssd")]
        assert all(r["wall_ms"] is None for r in rows)
