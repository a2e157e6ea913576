import numpy as np
import pytest

from organsim.errors import ParseError, SchemaError, ValidationError, WidthMismatch
from organsim.mesh_io import (
    KeyframeTrack,
    TriMesh,
    export_frame,
    frame_path,
    load_keyframes,
    load_mesh,
    save_keyframes,
)
from organsim.synthetic import box_mesh


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestObjParsing:
    def test_vertices_faces_and_name(self, tmp_path):
        mesh = load_mesh(write(tmp_path / "tri.obj", """
# comment line
o wedge
v 0 0 0
v 1.5 0 0
v 0 2 0.25
f 1 2 3
""".lstrip()))
        assert mesh.name == "wedge"
        np.testing.assert_allclose(mesh.vertices, [[0, 0, 0], [1.5, 0, 0], [0, 2, 0.25]])
        np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])

    def test_name_falls_back_to_file_stem(self, tmp_path):
        mesh = load_mesh(write(tmp_path / "organ.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"))
        assert mesh.name == "organ"

    def test_quad_fan_triangulation(self, tmp_path):
        mesh = load_mesh(write(tmp_path / "quad.obj", """
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 1 2 3 4
""".lstrip()))
        np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2], [0, 2, 3]])

    def test_face_tokens_with_slashes(self, tmp_path):
        mesh = load_mesh(write(tmp_path / "slash.obj", """
v 0 0 0
v 1 0 0
v 0 1 0
f 1/1/1 2/2/2 3/3/3
""".lstrip()))
        np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])

    def test_unknown_tags_ignored(self, tmp_path):
        mesh = load_mesh(write(tmp_path / "tags.obj", """
mtllib none.mtl
vn 0 0 1
vt 0 0
s off
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
""".lstrip()))
        assert len(mesh.vertices) == 3

    def test_bad_vertex_reports_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 2"):
            load_mesh(write(tmp_path / "bad.obj", "v 0 0 0\nv 1 oops 0\n"))

    def test_face_index_below_one(self, tmp_path):
        with pytest.raises(ParseError, match="line 4"):
            load_mesh(write(tmp_path / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"))

    def test_face_with_too_few_vertices(self, tmp_path):
        with pytest.raises(ParseError):
            load_mesh(write(tmp_path / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n"))

    def test_face_with_too_many_vertices(self, tmp_path):
        body = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4 5\n"
        with pytest.raises(ParseError):
            load_mesh(write(tmp_path / "bad.obj", body))

    def test_face_index_out_of_range(self, tmp_path):
        with pytest.raises(ValidationError):
            load_mesh(write(tmp_path / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"))

    def test_mesh_without_faces_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            load_mesh(write(tmp_path / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\n"))


class TestObjExport:
    def test_round_trip_six_decimals(self, tmp_path):
        mesh = box_mesh(2, size=0.37)
        path = tmp_path / "box.obj"
        export_frame(mesh, path)
        back = load_mesh(path)
        assert back.name == mesh.name
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=5e-7)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)

    def test_frame_path_zero_padded(self, tmp_path):
        assert frame_path("out/run", 0).endswith("run_0000.obj")
        assert frame_path("out/run", 37).endswith("run_0037.obj")
        assert frame_path("out/run", 12345).endswith("run_12345.obj")


class TestTriMeshValidation:
    def test_needs_three_vertices(self):
        with pytest.raises(ValidationError):
            TriMesh(np.zeros((2, 3)), np.array([[0, 1, 1]], dtype=np.int32)).validate()

    def test_rejects_collapsed_triangle(self):
        verts = np.eye(3)
        with pytest.raises(ValidationError):
            TriMesh(verts, np.array([[1, 1, 1]], dtype=np.int32)).validate()

    def test_rejects_negative_index(self):
        verts = np.eye(3)
        with pytest.raises(ValidationError):
            TriMesh(verts, np.array([[-1, 0, 1]], dtype=np.int32)).validate()

    def test_bbox_diagonal(self):
        mesh = box_mesh(1, size=(1.0, 2.0, 2.0))
        assert mesh.bbox_diagonal() == pytest.approx(3.0)


class TestKeyframes:
    def make_track(self, verts=4, frames=6, fps=10.0, period=None):
        rng = np.random.default_rng(7)
        data = rng.normal(size=(frames, verts, 3))
        return KeyframeTrack(fps=fps, frames=data, period_frames=period).validate()

    def test_round_trip(self, tmp_path):
        track = self.make_track(period=4)
        path = tmp_path / "track.json"
        save_keyframes(track, path)
        mesh = TriMesh(np.zeros((4, 3)), np.array([[0, 1, 2]], dtype=np.int32), "m")
        back = load_keyframes(path, mesh)
        assert back.fps == track.fps
        assert back.period_frames == 4
        np.testing.assert_allclose(back.frames, track.frames)

    def test_width_mismatch_names_both_counts(self, tmp_path):
        track = self.make_track(verts=5)
        path = tmp_path / "track.json"
        save_keyframes(track, path)
        mesh = TriMesh(np.zeros((4, 3)), np.array([[0, 1, 2]], dtype=np.int32), "m")
        with pytest.raises(WidthMismatch) as err:
            load_keyframes(path, mesh)
        assert "4" in str(err.value) and "5" in str(err.value)

    @pytest.mark.parametrize(
        "doc",
        [
            '{"frames": []}',
            '{"fps": 0, "period_frames": null, "frames": [[[0,0,0]]]}',
            '{"fps": true, "period_frames": null, "frames": [[[0,0,0]], [[0,0,0]]]}',
            '{"fps": 10, "period_frames": 1.5, "frames": [[[0,0,0]], [[0,0,0]]]}',
            '{"fps": 10, "period_frames": null, "frames": [[[0,0,0]]]}',
            '{"fps": 10, "period_frames": null, "frames": [[[0,0,0]], [[0,0]]]}',
            '{"fps": 10, "period_frames": null, "frames": [[[0,0,"x"]], [[0,0,0]]]}',
            "[1, 2, 3]",
            "not json",
        ],
    )
    def test_malformed_documents_rejected(self, tmp_path, doc):
        path = write(tmp_path / "track.json", doc)
        mesh = TriMesh(np.zeros((1, 3)), np.array([[0, 0, 1]], dtype=np.int32))
        mesh = TriMesh(np.zeros((3, 3)), np.array([[0, 1, 2]], dtype=np.int32))
        with pytest.raises((SchemaError, WidthMismatch)):
            load_keyframes(path, mesh)

    def test_linear_interpolation_midpoint(self):
        frames = np.array([[[0.0, 0, 0]], [[2.0, 4.0, 0]]])
        track = KeyframeTrack(fps=1.0, frames=frames).validate()
        np.testing.assert_allclose(track.sample(0.5), [[1.0, 2.0, 0.0]])

    def test_hold_last_frame_without_period(self):
        frames = np.array([[[0.0, 0, 0]], [[1.0, 0, 0]]])
        track = KeyframeTrack(fps=2.0, frames=frames).validate()
        np.testing.assert_allclose(track.sample(10.0), [[1.0, 0.0, 0.0]])
        _, vel = track.sample_with_velocity(10.0)
        np.testing.assert_allclose(vel, 0.0)

    def test_modulo_wrap_with_period(self):
        frames = np.array([[[float(k), 0, 0]] for k in range(4)])
        track = KeyframeTrack(fps=1.0, frames=frames, period_frames=4).validate()
        np.testing.assert_allclose(track.sample(5.0), track.sample(1.0))
        np.testing.assert_allclose(track.sample(4.25), track.sample(0.25))

    def test_velocity_from_frame_differencing(self):
        frames = np.array([[[0.0, 0, 0]], [[3.0, 0, 0]]])
        track = KeyframeTrack(fps=10.0, frames=frames).validate()
        _, vel = track.sample_with_velocity(0.05)
        np.testing.assert_allclose(vel, [[30.0, 0.0, 0.0]])

    def test_period_longer_than_frames_rejected(self):
        frames = np.zeros((2, 1, 3))
        with pytest.raises(ValidationError):
            KeyframeTrack(fps=1.0, frames=frames, period_frames=5).validate()
