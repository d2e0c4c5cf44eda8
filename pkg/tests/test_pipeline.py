import numpy as np
import pytest

from tumorcp.errors import (
    EmptyOrganSet,
    FullyClipped,
    NoTumorSource,
    ShapeMismatch,
)
from tumorcp.instances import OrganVoxelSet
from tumorcp.pipeline import (
    AugmentationRecord,
    Engine,
    PipelineConfig,
    dice,
    dice_standard,
    paste,
    sample_location,
    sample_pair,
)
from tumorcp.rng import RngStream
from tumorcp.transforms import TransformConfig

from .conftest import (
    UNIT,
    build_dataset,
    cube_instance,
    organ_tumor_labelmap,
    random_volume,
)
from .oracles import paste_accounting


def no_transform_config(**kwargs) -> PipelineConfig:
    cfg = PipelineConfig(
        transform=TransformConfig(p_rigid=0.0, p_elastic=0.0, p_gamma=0.0, p_blur=0.0),
        **kwargs,
    )
    cfg.validate()
    return cfg


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        cfg.validate()
        assert cfg.p_cp == 0.8
        assert cfg.mode == "mixed"
        assert cfg.mixed_intra_fraction == 0.5

    @pytest.mark.parametrize(
        "kwargs",
        [{"p_cp": 1.2}, {"p_cp": -0.1}, {"mode": "sideways"}, {"min_voxels": 0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs).validate()


class TestSamplePair:
    def test_intra_always_target(self):
        rng = RngStream(0)
        for _ in range(50):
            assert sample_pair("b", "intra", ["a", "b", "c"], 0.5, rng) == "b"

    def test_inter_two_cases(self):
        rng = RngStream(1)
        for _ in range(50):
            assert sample_pair("a", "inter", ["a", "b"], 0.5, rng) == "b"

    def test_inter_excludes_target_and_covers_pool(self):
        rng = RngStream(2)
        seen = {sample_pair("a", "inter", ["a", "b", "c", "d"], 0.5, rng) for _ in range(200)}
        assert seen == {"b", "c", "d"}

    def test_inter_no_source(self):
        with pytest.raises(NoTumorSource):
            sample_pair("a", "inter", ["a"], 0.5, RngStream(0))
        with pytest.raises(NoTumorSource):
            sample_pair("a", "inter", [], 0.5, RngStream(0))

    def test_mixed_split_binomial(self):
        rng = RngStream(2024, 77)
        n = 10_000
        intra = sum(
            sample_pair("a", "mixed", ["a", "b"], 0.5, rng) == "a" for _ in range(n)
        )
        assert abs(intra - 5000) <= 150


class TestSampleLocation:
    def test_single_voxel(self):
        organs = OrganVoxelSet("c", np.array([[3, 4, 5]], np.int32))
        rng = RngStream(0)
        for _ in range(10):
            assert sample_location(organs, rng) == (3, 4, 5)

    def test_two_voxel_split(self):
        organs = OrganVoxelSet("c", np.array([[0, 0, 0], [1, 1, 1]], np.int32))
        rng = RngStream(9, 9)
        n = 10_000
        first = sum(sample_location(organs, rng) == (0, 0, 0) for _ in range(n))
        assert abs(first - 5000) <= 150

    def test_empty_raises(self):
        organs = OrganVoxelSet("c", np.zeros((0, 3), np.int32))
        with pytest.raises(EmptyOrganSet):
            sample_location(organs, RngStream(0))


class TestPaste:
    def setup_method(self):
        self.volume = random_volume((32, 32, 16), seed=11)
        self.labelmap = organ_tumor_labelmap((32, 32, 16), [(8, 24), (8, 24), (4, 12)], [])

    def test_center_paste_full_write(self):
        inst = cube_instance((3, 3, 3), value=500.0)
        loc = (16, 16, 8)
        vol2, lab2, clipped = paste(inst, self.volume, self.labelmap, loc)
        assert clipped == 0
        assert int((lab2.data == 2).sum()) == 27
        expected = np.zeros((32, 32, 16), bool)
        expected[15:18, 15:18, 7:10] = True
        assert dice(lab2.data == 2, expected) == 1.0
        assert np.all(vol2.data[expected] == 500.0)

    def test_corner_paste_clips_19(self):
        inst = cube_instance((3, 3, 3), value=500.0)
        vol2, lab2, clipped = paste(inst, self.volume, self.labelmap, (0, 0, 0))
        written_oracle, clipped_oracle, coords = paste_accounting(inst.mask, (0, 0, 0), (32, 32, 16))
        assert (written_oracle, clipped_oracle) == (8, 19)
        assert clipped == clipped_oracle
        assert int((lab2.data == 2).sum()) == written_oracle
        for c in coords:
            assert lab2.data[c] == 2

    @pytest.mark.parametrize("seed", range(10))
    def test_random_placements_match_oracle(self, seed):
        gen = np.random.default_rng(seed)
        extent = tuple(int(gen.integers(1, 7)) for _ in range(3))
        mask = gen.random(extent) > 0.35
        if not mask.any():
            mask[0, 0, 0] = True
        idx = np.nonzero(mask)
        sl = tuple(slice(int(a.min()), int(a.max()) + 1) for a in idx)
        mask = mask[sl]
        from tumorcp.instances import TumorInstance

        inst = TumorInstance(
            "c",
            (0, 0, 0),
            tuple(s - 1 for s in mask.shape),
            mask,
            np.full(mask.shape, 99.0, np.float32),
            UNIT,
            int(mask.sum()),
        )
        loc = tuple(int(gen.integers(-2, d + 2)) for d in (32, 32, 16))
        written_o, clipped_o, coords = paste_accounting(inst.mask, loc, (32, 32, 16))
        if written_o == 0:
            with pytest.raises(FullyClipped):
                paste(inst, self.volume, self.labelmap, loc)
            return
        vol2, lab2, clipped = paste(inst, self.volume, self.labelmap, loc)
        assert clipped == clipped_o
        assert int((lab2.data == 2).sum()) == written_o
        footprint = np.zeros((32, 32, 16), bool)
        for c in coords:
            footprint[c] = True
        # conservation outside the footprint, bit-exact
        assert np.array_equal(vol2.data[~footprint], self.volume.data[~footprint])
        assert np.array_equal(lab2.data[~footprint], self.labelmap.data[~footprint])

    def test_overwrite_semantics(self):
        lab = organ_tumor_labelmap((32, 32, 16), [(8, 24), (8, 24), (4, 12)], [[(15, 18), (15, 18), (7, 10)]])
        inst = cube_instance((3, 3, 3), value=-123.0)
        vol2, lab2, clipped = paste(inst, self.volume, lab, (16, 16, 8))
        assert clipped == 0
        assert np.all(vol2.data[15:18, 15:18, 7:10] == -123.0)
        assert np.all(lab2.data[15:18, 15:18, 7:10] == 2)

    def test_inputs_unmodified(self):
        before_v = self.volume.data.copy()
        before_l = self.labelmap.data.copy()
        inst = cube_instance((5, 5, 5), value=77.0)
        paste(inst, self.volume, self.labelmap, (10, 10, 8))
        assert np.array_equal(self.volume.data, before_v)
        assert np.array_equal(self.labelmap.data, before_l)

    def test_fully_outside_raises(self):
        inst = cube_instance((3, 3, 3))
        with pytest.raises(FullyClipped):
            paste(inst, self.volume, self.labelmap, (200, 200, 200))

    def test_clip_disabled_rejects_partial(self):
        inst = cube_instance((3, 3, 3))
        with pytest.raises(FullyClipped):
            paste(inst, self.volume, self.labelmap, (0, 0, 0), clip=False)
        vol2, lab2, clipped = paste(inst, self.volume, self.labelmap, (16, 16, 8), clip=False)
        assert clipped == 0

    def test_shape_mismatch(self):
        from tumorcp.volume import LabelMap

        inst = cube_instance((3, 3, 3))
        with pytest.raises(ShapeMismatch):
            paste(inst, self.volume, LabelMap(np.zeros((32, 32, 15), np.uint8)), (5, 5, 5))


class TestDice:
    def test_equal_nonempty(self):
        m = np.zeros((4, 4, 4), bool)
        m[1:3] = True
        assert dice(m, m) == 1.0
        assert dice_standard(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4, 4), bool)
        b = np.zeros((4, 4, 4), bool)
        a[0], b[3] = True, True
        assert dice(a, b) == 0.0
        assert dice_standard(a, b) == 0.0

    def test_shifted_cube_half_overlap(self):
        # 27-voxel cubes overlapping in 18 voxels: |i| = 18, |u| = 36
        a = np.zeros((8, 8, 8), bool)
        b = np.zeros((8, 8, 8), bool)
        a[2:5, 2:5, 2:5] = True
        b[3:6, 2:5, 2:5] = True
        inter = int((a & b).sum())
        union = int((a | b).sum())
        assert (inter, union) == (18, 36)
        assert dice(a, b) == 0.5
        assert dice_standard(a, b) == pytest.approx(2 * 18 / 54)

    def test_both_empty(self):
        e = np.zeros((3, 3, 3), bool)
        assert dice(e, e) == 1.0
        assert dice_standard(e, e) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dice(np.zeros((2, 2, 2), bool), np.zeros((2, 2, 3), bool))


class TestAugmentOnce:
    def test_p_cp_zero_identity(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=2)
        engine = Engine(index, no_transform_config(p_cp=0.0))
        vol0, lab0 = engine.case("case00")
        vol, lab, record = engine.augment_once("case00", RngStream(5))
        assert record.applied is False
        assert record.failure_reason is None
        assert record.source_case is None
        assert np.array_equal(vol.data, vol0.data)
        assert np.array_equal(lab.data, lab0.data)
        # fresh buffers, not the cached arrays
        assert vol.data is not vol0.data

    def test_p_cp_one_intra_no_transform_accounting(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=1, tumors_per_case=1)
        engine = Engine(index, no_transform_config(p_cp=1.0, mode="intra"))
        vol0, lab0 = engine.case("case00")
        before = int((lab0.data == 2).sum())
        (inst,) = engine.instances("case00")
        vol, lab, record = engine.augment_once("case00", RngStream(3))
        assert record.applied is True
        assert record.source_case == "case00"
        after = int((lab.data == 2).sum())
        overlap = before + inst.voxel_count - record.clipped_voxels - after
        # pasted-over-existing-tumor voxels are the only double counting
        assert overlap >= 0
        written = inst.voxel_count - record.clipped_voxels
        assert after >= before or overlap > 0
        assert after == before + written - overlap

    def test_p_cp_one_paste_is_verbatim_copy(self, tmp_path):
        # paste onto organ voxels only, away from the existing tumor
        index = build_dataset(tmp_path / "d", n_cases=1, tumors_per_case=1)
        cfg = no_transform_config(p_cp=1.0, mode="intra", allow_paste_on_tumor=False)
        engine = Engine(index, cfg)
        vol0, lab0 = engine.case("case00")
        (inst,) = engine.instances("case00")
        vol, lab, record = engine.augment_once("case00", RngStream(8))
        assert record.applied is True
        assert record.transform_params.any_active() is False
        changed = vol.data != vol0.data
        ext = inst.extent
        lo = [record.paste_location[a] - ext[a] // 2 for a in range(3)]
        # intensity-changed voxels lie exactly where masked source voxels landed
        for x, y, z in zip(*np.nonzero(changed)):
            src = (x - lo[0], y - lo[1], z - lo[2])
            assert inst.mask[src]
            assert vol.data[x, y, z] == inst.intensities[src]

    def test_p_cp_gate_frequency(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=1, dims=(24, 24, 12))
        engine = Engine(index, no_transform_config(p_cp=0.8, mode="intra"))
        n = 10_000
        applied = 0
        for i in range(n):
            _, _, record = engine.augment_once("case00", RngStream(1234, i))
            applied += record.applied
        assert abs(applied - 8000) <= 120

    def test_deterministic_per_stream(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=3)
        cfg = PipelineConfig(p_cp=1.0)
        cfg.transform.elastic_sigma_range = (4.0, 5.0)  # trim runtime
        engine = Engine(index, cfg)
        for sid in range(4):
            v1, l1, r1 = engine.augment_once("case01", RngStream(99, sid))
            v2, l2, r2 = engine.augment_once("case01", RngStream(99, sid))
            assert np.array_equal(v1.data, v2.data)
            assert np.array_equal(l1.data, l2.data)
            assert r1 == r2

    def test_no_tumor_source_falls_back(self, tmp_path):
        root = tmp_path / "d"
        root.mkdir()
        from tumorcp.io import CaseEntry, save_case

        vol = random_volume((16, 16, 8), seed=1)
        lab = organ_tumor_labelmap((16, 16, 8), [(4, 12)] * 2 + [(2, 6)], [])
        save_case(vol, lab, root / "only_img.nii", root / "only_seg.nii")
        from tumorcp.io import DatasetIndex

        index = DatasetIndex([CaseEntry("only", root / "only_img.nii", root / "only_seg.nii")])
        engine = Engine(index, no_transform_config(p_cp=1.0, mode="intra"))
        vol2, lab2, record = engine.augment_once("only", RngStream(0))
        assert record.applied is False
        assert record.failure_reason == "no_tumor_source"
        assert np.array_equal(vol2.data, vol.data)

    def test_empty_organ_set_falls_back(self, tmp_path):
        root = tmp_path / "d"
        root.mkdir()
        from tumorcp.io import CaseEntry, DatasetIndex, save_case

        # tumor exists but no organ: pasting is impossible when tumor
        # voxels are excluded as placement sites
        vol = random_volume((16, 16, 8), seed=2)
        lab_arr = np.zeros((16, 16, 8), np.uint8)
        lab_arr[5:8, 5:8, 3:5] = 2
        from tumorcp.volume import LabelMap

        save_case(vol, LabelMap(lab_arr), root / "t_img.nii", root / "t_seg.nii")
        index = DatasetIndex([CaseEntry("t", root / "t_img.nii", root / "t_seg.nii")])
        cfg = no_transform_config(p_cp=1.0, mode="intra", allow_paste_on_tumor=False)
        engine = Engine(index, cfg)
        _, _, record = engine.augment_once("t", RngStream(1))
        assert record.applied is False
        assert record.failure_reason == "empty_organ_set"

    def test_record_round_trip(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=2)
        engine = Engine(index, no_transform_config(p_cp=1.0, mode="intra"))
        _, _, record = engine.augment_once("case00", RngStream(12))
        doc = record.to_dict()
        assert AugmentationRecord.from_dict(doc) == record

    def test_min_voxels_filters_sources(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=1, tumors_per_case=2)
        cfg = no_transform_config(p_cp=1.0, mode="intra", min_voxels=10**6)
        engine = Engine(index, cfg)
        _, _, record = engine.augment_once("case00", RngStream(0))
        assert record.applied is False
        assert record.failure_reason == "no_tumor_source"
        # applied=false leaves every other optional field unset
        assert record.source_case is None
        assert record.instance_index is None
        assert record.transform_params is None
        assert record.paste_location is None
        assert record.clipped_voxels is None

    def test_intensity_changes_confined_to_footprint(self, tmp_path):
        # with transforms firing, every intensity change must lie inside
        # the pasted footprint; everything else is conserved bit-exact
        from tumorcp.io import CaseEntry, DatasetIndex, save_case

        root = tmp_path / "d"
        root.mkdir()
        src_vol = random_volume((20, 20, 10), seed=3)
        src_lab = organ_tumor_labelmap((20, 20, 10), [(4, 16)] * 2 + [(2, 8)], [[(8, 12)] * 2 + [(3, 7)]])
        tgt_vol = random_volume((20, 20, 10), seed=4)
        tgt_lab = organ_tumor_labelmap((20, 20, 10), [(4, 16)] * 2 + [(2, 8)], [])
        save_case(src_vol, src_lab, root / "src_img.nii", root / "src_seg.nii")
        save_case(tgt_vol, tgt_lab, root / "tgt_img.nii", root / "tgt_seg.nii")
        index = DatasetIndex(
            [
                CaseEntry("src", root / "src_img.nii", root / "src_seg.nii"),
                CaseEntry("tgt", root / "tgt_img.nii", root / "tgt_seg.nii"),
            ]
        )
        cfg = PipelineConfig(p_cp=1.0, mode="inter")
        cfg.transform.elastic_sigma_range = (3.0, 5.0)
        cfg.transform.elastic_alpha_range = (0.0, 300.0)
        engine = Engine(index, cfg)
        applied = 0
        for i in range(6):
            vol, lab, record = engine.augment_once("tgt", RngStream(55, i))
            if not record.applied:
                continue
            applied += 1
            footprint = lab.data == 2  # the target had no tumor voxels before
            changed = vol.data != tgt_vol.data
            assert not np.any(changed & ~footprint)
            assert np.array_equal(lab.data[~footprint], tgt_lab.data[~footprint])
        assert applied >= 3

    def test_inter_case_spacing_resample(self, tmp_path):
        # fine-spaced source tumor pasted into a coarse target: the patch
        # is resampled to target spacing before placement
        from tumorcp.io import CaseEntry, DatasetIndex, save_case
        from tumorcp.volume import Spacing

        root = tmp_path / "d"
        root.mkdir()
        fine = random_volume((24, 24, 24), seed=1, spacing=Spacing(1, 1, 1))
        fine_lab = organ_tumor_labelmap(
            (24, 24, 24), [(4, 20)] * 3, [[(8, 16)] * 3]
        )
        coarse = random_volume((24, 24, 24), seed=2, spacing=Spacing(2, 2, 2))
        coarse_lab = organ_tumor_labelmap((24, 24, 24), [(4, 20)] * 3, [])
        save_case(fine, fine_lab, root / "fine_img.nii", root / "fine_seg.nii")
        save_case(coarse, coarse_lab, root / "coarse_img.nii", root / "coarse_seg.nii")
        index = DatasetIndex(
            [
                CaseEntry("coarse", root / "coarse_img.nii", root / "coarse_seg.nii"),
                CaseEntry("fine", root / "fine_img.nii", root / "fine_seg.nii"),
            ]
        )
        engine = Engine(index, no_transform_config(p_cp=1.0, mode="inter"))
        vol, lab, record = engine.augment_once("coarse", RngStream(4))
        assert record.applied is True
        assert record.source_case == "fine"
        # an 8^3 tumor at 1mm lands as ~4^3 at 2mm
        written = int((lab.data == 2).sum())
        assert written + record.clipped_voxels == pytest.approx(64, abs=12)

    def test_image_hook_pass_through(self, tmp_path):
        index = build_dataset(tmp_path / "d", n_cases=1)

        def shift_intensities(volume, labelmap):
            shifted = volume.copy()
            shifted.data += 1.0
            return shifted, labelmap

        plain = Engine(index, no_transform_config(p_cp=0.0))
        hooked = Engine(index, no_transform_config(p_cp=0.0), image_hook=shift_intensities)
        v0, _, _ = plain.augment_once("case00", RngStream(1))
        v1, _, record = hooked.augment_once("case00", RngStream(1))
        assert record.applied is False
        assert np.array_equal(v1.data, v0.data + 1.0)

        hooked_applied = Engine(
            index, no_transform_config(p_cp=1.0, mode="intra"), image_hook=shift_intensities
        )
        plain_applied = Engine(index, no_transform_config(p_cp=1.0, mode="intra"))
        v2, _, r2 = plain_applied.augment_once("case00", RngStream(2))
        v3, _, r3 = hooked_applied.augment_once("case00", RngStream(2))
        assert r2 == r3 and r2.applied
        assert np.array_equal(v3.data, v2.data + 1.0)
