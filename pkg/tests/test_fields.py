import numpy as np
import pytest

from meltfno.fields import (Dataset, DatasetError, DatasetManifest, FieldBundle,
                            Grid3, ScalarField3, load_manifest, make_grid,
                            read_bundle, save_manifest, subsample,
                            subsample_bundle, write_bundle)


def random_bundle(grid, rng, f32=True):
    T = rng.uniform(300.0, 3000.0, size=grid.n_cells)
    alpha = rng.uniform(0.0, 1.0, size=grid.n_cells)
    fl = rng.uniform(0.0, 1.0, size=grid.n_cells)
    if f32:
        T, alpha, fl = (a.astype(np.float32).astype(np.float64)
                        for a in (T, alpha, fl))
    return FieldBundle(ScalarField3(grid, T), ScalarField3(grid, alpha),
                       ScalarField3(grid, fl))


class TestGrid:
    def test_paper_grid_extents(self):
        g = make_grid(90, 40, 30, 1e-5)
        assert g.extents == pytest.approx((0.9e-3, 0.4e-3, 0.3e-3))
        assert g.n_cells == 108000

    def test_smallest_grid(self):
        g = make_grid(2, 2, 2, 1.0)
        assert g.n_cells == 8
        assert g.flat_index(1, 1, 1) == 7

    def test_layout_corner_index(self):
        # brute-force enumeration: x slowest, z fastest
        g = make_grid(3, 4, 5, 0.5)
        idx = 0
        for ix in range(3):
            for iy in range(4):
                for iz in range(5):
                    assert g.flat_index(ix, iy, iz) == idx
                    idx += 1
        assert g.flat_index(2, 3, 4) == 59 == g.n_cells - 1

    @pytest.mark.parametrize("shape", [(2, 2, 2), (3, 5, 7), (8, 8, 8), (8, 4, 6)])
    def test_index_bijection_exhaustive(self, shape):
        g = make_grid(*shape, 1e-5)
        seen = set()
        for ix in range(shape[0]):
            for iy in range(shape[1]):
                for iz in range(shape[2]):
                    idx = g.flat_index(ix, iy, iz)
                    assert g.index_triple(idx) == (ix, iy, iz)
                    seen.add(idx)
        assert seen == set(range(g.n_cells))

    def test_cell_center_roundtrip(self):
        g = make_grid(4, 5, 6, 2e-5, origin=(1e-3, 0.0, -5e-4))
        for triple in [(0, 0, 0), (3, 4, 5), (2, 1, 3)]:
            assert g.cell_of(*g.cell_center(*triple)) == triple

    @pytest.mark.parametrize("bad", [(1, 2, 2, 1.0), (2, 2, 2, 0.0),
                                     (2, 0, 2, 1.0), (2, 2, 2, -1e-5)])
    def test_rejects_bad_dimensions(self, bad):
        with pytest.raises(ValueError):
            make_grid(*bad)


class TestFieldsAndBundles:
    def test_field_rejects_nan(self):
        g = make_grid(2, 2, 2, 1.0)
        vals = np.ones(8)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            ScalarField3(g, vals)

    def test_field_is_immutable(self):
        g = make_grid(2, 2, 2, 1.0)
        f = ScalarField3(g, np.ones(8))
        with pytest.raises((ValueError, AttributeError)):
            f.values[0] = 2.0

    def test_bundle_range_invariants(self):
        g = make_grid(2, 2, 2, 1.0)
        ok = ScalarField3(g, np.full(8, 0.5))
        with pytest.raises(ValueError):
            FieldBundle(ScalarField3(g, np.full(8, -1.0)), ok, ok)  # T < 0
        with pytest.raises(ValueError):
            FieldBundle(ScalarField3(g, np.full(8, 300.0)),
                        ScalarField3(g, np.full(8, 1.5)), ok)  # alpha > 1


class TestSubsample:
    def test_factor_one_identity(self):
        g = make_grid(4, 4, 4, 1.0)
        f = ScalarField3(g, np.arange(64, dtype=float))
        assert subsample(f, 1) == f

    def test_ramp_corners(self):
        # hand-enumerated: value = flat index; keep every 2nd node
        g = make_grid(4, 4, 4, 1.0)
        f = ScalarField3(g, np.arange(64, dtype=float))
        s = subsample(f, 2)
        assert s.grid.shape == (2, 2, 2)
        for ix in range(2):
            for iy in range(2):
                for iz in range(2):
                    expected = g.flat_index(2 * ix, 2 * iy, 2 * iz)
                    assert s.as_3d()[ix, iy, iz] == expected

    def test_spacing_metadata(self):
        g = make_grid(180, 80, 60, 5e-6)
        f = ScalarField3(g, np.zeros(g.n_cells))
        s = subsample(f, 2)
        assert s.grid.shape == (90, 40, 30)
        assert s.grid.dx == pytest.approx(1e-5)

    def test_composition(self):
        rng = np.random.default_rng(0)
        g = make_grid(8, 8, 8, 1.0)
        f = ScalarField3(g, rng.normal(size=g.n_cells))
        assert subsample(subsample(f, 2), 2) == subsample(f, 4)

    def test_rejects_bad_factor(self):
        g = make_grid(4, 4, 4, 1.0)
        f = ScalarField3(g, np.zeros(64))
        with pytest.raises(ValueError):
            subsample(f, 0)


class TestDatasetIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        g = make_grid(90, 40, 30, 1e-5)
        bundle = random_bundle(g, rng)
        entry = write_bundle(bundle, str(tmp_path), "s0", power_w=100.0,
                             v_scan_m_s=0.5, h_star=5.0)
        back = read_bundle(str(tmp_path), entry, g)
        assert back == bundle

    def test_manifest_roundtrip_and_validation(self, tmp_path):
        rng = np.random.default_rng(2)
        g = make_grid(4, 4, 4, 1e-5)
        manifest = DatasetManifest(grid=g, provenance="oracle")
        for i, split in enumerate(("train", "validation", "test")):
            entry = write_bundle(random_bundle(g, rng), str(tmp_path), f"s{i}",
                                 power_w=50.0 + i, v_scan_m_s=0.3, h_star=4.0,
                                 split=split)
            manifest.samples.append(entry)
        save_manifest(manifest, str(tmp_path))
        loaded = load_manifest(str(tmp_path))
        assert [s.id for s in loaded.samples] == ["s0", "s1", "s2"]
        ds = Dataset(str(tmp_path))
        assert ds.ids("validation") == ["s1"]
        assert ds.load("s0").grid == g

    def test_missing_field_file(self, tmp_path):
        rng = np.random.default_rng(3)
        g = make_grid(4, 4, 4, 1e-5)
        entry = write_bundle(random_bundle(g, rng), str(tmp_path), "s0",
                             power_w=50.0, v_scan_m_s=0.3, h_star=4.0)
        (tmp_path / entry.files["alpha"]).unlink()
        with pytest.raises(DatasetError, match="missing field file"):
            read_bundle(str(tmp_path), entry, g)

    def test_truncated_file_length_check(self, tmp_path):
        rng = np.random.default_rng(4)
        g = make_grid(4, 4, 4, 1e-5)
        entry = write_bundle(random_bundle(g, rng), str(tmp_path), "s0",
                             power_w=50.0, v_scan_m_s=0.3, h_star=4.0)
        path = tmp_path / entry.files["T"]
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DatasetError, match="scalars"):
            read_bundle(str(tmp_path), entry, g)

    def test_nan_rejected_before_write(self, tmp_path):
        g = make_grid(2, 2, 2, 1.0)
        vals = np.full(8, 300.0)
        vals[0] = np.nan
        with pytest.raises(ValueError):
            ScalarField3(g, vals)  # cannot even build the bundle

    def test_unknown_schema_version(self, tmp_path):
        with pytest.raises(DatasetError, match="schema_version"):
            DatasetManifest.from_json({"schema_version": 99, "grid": {
                "nx": 2, "ny": 2, "nz": 2, "dx": 1.0}})

    def test_duplicate_ids_rejected(self, tmp_path):
        rng = np.random.default_rng(5)
        g = make_grid(4, 4, 4, 1e-5)
        manifest = DatasetManifest(grid=g)
        for _ in range(2):
            manifest.samples.append(
                write_bundle(random_bundle(g, rng), str(tmp_path), "dup",
                             power_w=50.0, v_scan_m_s=0.3, h_star=4.0))
        with pytest.raises(DatasetError, match="duplicate"):
            manifest.validate(str(tmp_path))

    def test_ingestion_clamps_vof_excursion(self, tmp_path, caplog):
        g = make_grid(2, 2, 2, 1.0)
        files = {}
        for name, val in (("T", 300.0), ("alpha", 1.0 + 5e-7), ("fl", 0.5)):
            rel = f"s0_{name}.f32"
            np.full(8, val, dtype="<f4").tofile(tmp_path / rel)
            files[name] = rel
        from meltfno.fields import SampleEntry
        entry = SampleEntry(id="s0", power_w=50.0, v_scan_m_s=0.3, h_star=4.0,
                            split="train", files=files)
        bundle = read_bundle(str(tmp_path), entry, g)
        assert bundle.alpha.values.max() == 1.0

    def test_subsample_bundle(self):
        rng = np.random.default_rng(6)
        g = make_grid(4, 4, 4, 1.0)
        b = random_bundle(g, rng)
        s = subsample_bundle(b, 2)
        assert s.grid.shape == (2, 2, 2)
        assert s.T.as_3d()[0, 0, 0] == b.T.as_3d()[0, 0, 0]
