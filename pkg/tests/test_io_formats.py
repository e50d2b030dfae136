import numpy as np
import pytest

from pointreg import DepthMap, PointCloud, read_camera, read_pfm, read_ply, write_camera, write_pfm, write_ply
from pointreg.camera import CameraModel
from pointreg.errors import (
    BadShapeError,
    CountMismatchError,
    MalformedHeaderError,
    MissingKeyError,
    NonOrthonormalRotationError,
    UnsupportedPropertyError,
    WrongChannelCountError,
)


@pytest.fixture
def cam():
    K = np.array([[100.0, 0.0, 64.0], [0.0, 100.0, 64.0], [0.0, 0.0, 1.0]])
    return CameraModel(K, np.eye(3), np.zeros(3), width=129, height=129)


class TestPly:
    def test_single_point_round_trip(self, tmp_path):
        cloud = PointCloud(np.array([[1.0, 2.0, 3.0]]))
        path = tmp_path / "one.ply"
        write_ply(cloud, path)
        back = read_ply(path)
        np.testing.assert_array_equal(back.points, cloud.points)

    @pytest.mark.parametrize("fmt", ["ascii", "binary_little_endian"])
    def test_round_trip_within_float32(self, tmp_path, fmt):
        rng = np.random.default_rng(0)
        cloud = PointCloud(rng.standard_normal((57, 3)) * 100.0)
        path = tmp_path / "c.ply"
        write_ply(cloud, path, format=fmt)
        back = read_ply(path)
        np.testing.assert_array_equal(
            back.points, cloud.points.astype(np.float32).astype(np.float64)
        )

    def test_ascii_and_binary_read_equal(self, tmp_path):
        rng = np.random.default_rng(1)
        cloud = PointCloud(rng.uniform(-1e6, 1e6, (200, 3)))
        write_ply(cloud, tmp_path / "a.ply", format="ascii")
        write_ply(cloud, tmp_path / "b.ply", format="binary_little_endian")
        a = read_ply(tmp_path / "a.ply")
        b = read_ply(tmp_path / "b.ply")
        np.testing.assert_array_equal(a.points, b.points)

    @pytest.mark.parametrize("fmt", ["ascii", "binary_little_endian"])
    def test_double_round_trip_byte_identical(self, tmp_path, fmt):
        rng = np.random.default_rng(2)
        cloud = PointCloud(rng.standard_normal((33, 3)) * rng.uniform(1e-4, 1e4))
        p1, p2 = tmp_path / "r1.ply", tmp_path / "r2.ply"
        write_ply(cloud, p1, format=fmt)
        write_ply(read_ply(p1), p2, format=fmt)
        assert p1.read_bytes() == p2.read_bytes()

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 5\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
            "0 0 0\n1 1 1\n2 2 2\n3 3 3\n"
        )
        with pytest.raises(CountMismatchError):
            read_ply(path)

    def test_binary_trailing_bytes(self, tmp_path):
        path = tmp_path / "bad.ply"
        header = (
            "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
        )
        path.write_bytes(header.encode() + b"\x00" * 13)
        with pytest.raises(CountMismatchError):
            read_ply(path)

    def test_extra_properties_skipped_with_warning(self, tmp_path):
        path = tmp_path / "extra.ply"
        header = (
            "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nend_header\n"
        )
        rec = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], dtype="<f4")
        body = b"".join(rec[i].tobytes() + bytes([i]) for i in range(2))
        path.write_bytes(header.encode() + body)
        with pytest.warns(UserWarning, match="red"):
            cloud = read_ply(path)
        np.testing.assert_array_equal(cloud.points, rec.astype(np.float64))

    def test_missing_xyz_is_error(self, tmp_path):
        path = tmp_path / "noz.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nend_header\n0 0\n"
        )
        with pytest.raises(MalformedHeaderError):
            read_ply(path)

    def test_list_property_rejected(self, tmp_path):
        path = tmp_path / "list.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property list uchar int vertex_indices\nend_header\n0 0 0\n"
        )
        with pytest.raises(UnsupportedPropertyError):
            read_ply(path)

    def test_write_rejects_invalid_points(self, tmp_path):
        cloud = PointCloud(np.zeros((2, 3)), [True, False])
        with pytest.raises(ValueError):
            write_ply(cloud, tmp_path / "x.ply")

    def test_missing_magic(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text("plyy\nformat ascii 1.0\nend_header\n")
        with pytest.raises(MalformedHeaderError):
            read_ply(path)


class TestPfm:
    def test_round_trip_exact(self, tmp_path):
        depth = DepthMap(np.array([[1.0, 2.0], [3.0, 4.0]]))
        path = tmp_path / "d.pfm"
        write_pfm(depth, path)
        back = read_pfm(path)
        np.testing.assert_array_equal(back.values, depth.values)
        assert back.valid.all()

    def test_zero_pixel_becomes_invalid(self, tmp_path):
        vals = np.array([[1.0, 0.0], [3.0, -2.0]])
        depth = DepthMap(vals, vals > 0)
        path = tmp_path / "d.pfm"
        write_pfm(depth, path)
        back = read_pfm(path)
        assert back.valid.tolist() == [[True, False], [True, False]]
        np.testing.assert_array_equal(back.values, vals)

    def test_color_pfm_rejected(self, tmp_path):
        path = tmp_path / "c.pfm"
        path.write_bytes(b"PF\n1 1\n-1.0\n" + b"\x00" * 12)
        with pytest.raises(WrongChannelCountError):
            read_pfm(path)

    def test_double_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        vals = rng.uniform(-1.0, 5.0, (7, 5))
        depth = DepthMap(vals, vals > 0)
        p1, p2 = tmp_path / "a.pfm", tmp_path / "b.pfm"
        write_pfm(depth, p1)
        write_pfm(read_pfm(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_big_endian_read(self, tmp_path):
        vals = np.array([[1.5, 2.5]], dtype=">f4")
        path = tmp_path / "be.pfm"
        path.write_bytes(b"Pf\n2 1\n1.0\n" + vals.tobytes())
        back = read_pfm(path)
        np.testing.assert_array_equal(back.values, [[1.5, 2.5]])

    def test_rows_stored_bottom_to_top(self, tmp_path):
        depth = DepthMap(np.array([[1.0], [2.0]]))  # top row 1, bottom row 2
        path = tmp_path / "r.pfm"
        write_pfm(depth, path)
        raw = path.read_bytes()
        body = np.frombuffer(raw[len(b"Pf\n1 2\n-1.0\n"):], dtype="<f4")
        assert body.tolist() == [2.0, 1.0]

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "t.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 15)
        with pytest.raises(MalformedHeaderError):
            read_pfm(path)


class TestCameraFile:
    def test_round_trip(self, tmp_path, cam):
        path = tmp_path / "camera.txt"
        write_camera(cam, path)
        back = read_camera(path)
        np.testing.assert_array_equal(back.intrinsics, cam.intrinsics)
        np.testing.assert_array_equal(back.rotation, cam.rotation)
        np.testing.assert_array_equal(back.translation, cam.translation)
        assert (back.width, back.height) == (cam.width, cam.height)

    def test_identity_pose_parses(self, tmp_path):
        path = tmp_path / "camera.txt"
        path.write_text(
            "width 129\nheight 129\n"
            "intrinsics 100 0 64 0 100 64 0 0 1\n"
            "cam2world 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n"
        )
        cam = read_camera(path)
        assert cam.intrinsics[0, 0] == 100.0

    def test_scaled_rotation_rejected(self, tmp_path):
        path = tmp_path / "camera.txt"
        path.write_text(
            "width 4\nheight 4\n"
            "intrinsics 100 0 2 0 100 2 0 0 1\n"
            "cam2world 2 0 0 0 0 2 0 0 0 0 2 0 0 0 0 1\n"
        )
        with pytest.raises(NonOrthonormalRotationError):
            read_camera(path)

    def test_missing_width(self, tmp_path):
        path = tmp_path / "camera.txt"
        path.write_text(
            "height 4\n"
            "intrinsics 100 0 2 0 100 2 0 0 1\n"
            "cam2world 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n"
        )
        with pytest.raises(MissingKeyError):
            read_camera(path)

    @pytest.mark.parametrize(
        "intrinsics, cam2world",
        [
            # last intrinsics row not (0,0,1)
            ("100 0 2 0 100 2 0 0 2", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1"),
            # wrong value count
            ("100 0 2 0 100 2 0 0", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1"),
            # bad homogeneous bottom row
            ("100 0 2 0 100 2 0 0 1", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 2"),
            # negative focal length
            ("-100 0 2 0 100 2 0 0 1", "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1"),
        ],
    )
    def test_bad_shapes(self, tmp_path, intrinsics, cam2world):
        path = tmp_path / "camera.txt"
        path.write_text(
            f"width 4\nheight 4\nintrinsics {intrinsics}\ncam2world {cam2world}\n"
        )
        with pytest.raises(BadShapeError):
            read_camera(path)
