"""Edit-session lifecycle: fit pipeline, command surface, undo/redo, persistence.

The expensive mesh->fit->search pipeline runs once per module; each test gets
a fresh session sharing the immutable fitted field, so edit-state assertions
never leak between tests.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
import pytest

from morphield.deformer import DeformerParams
from morphield.session import (
    HISTORY_CAP,
    EditSession,
    SessionError,
    create_session,
    create_session_from_mesh,
    load_session,
    save_session,
    sidecar_path,
)
from morphield.shapes import box_mesh, two_spheres_mesh

from helpers import bisect_zero


@pytest.fixture(scope="module")
def fitted():
    return create_session_from_mesh(two_spheres_mesh(subdivisions=2), "two-spheres", n=32)


@pytest.fixture()
def sess(fitted):
    s = fitted
    return EditSession(
        s.mesh_label, s.mesh_hash, s.transform, s.margin, s.normalized,
        s.field, s.solve_report, s.critical_points, s.timings,
    )


def probe_points(count=1000, seed=11):
    return np.random.default_rng(seed).uniform(0.05, 0.95, size=(count, 3))


def surface_anchor(sess) -> np.ndarray:
    """Zero crossing on a sphere's +y flank, clear of the editable gap region."""
    inside = next(p for p in sess.critical_points if p.cls == "minimum")
    return bisect_zero(sess.composite.eval, inside.position, inside.position + [0.0, 0.35, 0.0])


# -- pipeline -----------------------------------------------------------------


def test_two_sphere_fit_finds_the_gap_saddle(sess):
    assert len(sess.saddles) >= 1
    assert sess.solve_report.converged and sess.solve_report.residual <= 1e-8
    assert sess.timings.fit_seconds > 0.0 and sess.timings.search_seconds > 0.0
    s = sess.saddles[0]
    # normalize_to_unit rescales the 0.54-wide scene to span 0.8, so the
    # analytic half-gap of 0.03 stretches by the same factor
    assert np.allclose(s.position, [0.5, 0.5, 0.5], atol=5e-3)
    assert abs(s.value - 0.03 * (0.8 / 0.54)) < 4e-3
    assert len(sess.mesh_hash) == 64


def test_minimal_grid_session_round_trips(tmp_path):
    tiny = create_session_from_mesh(box_mesh(), "box", n=8)
    path = tmp_path / "tiny.json"
    save_session(tiny, path)
    loaded = load_session(path)
    assert np.array_equal(loaded.field.coefficients, tiny.field.coefficients)
    assert loaded.spec.n == 8


def test_create_session_propagates_missing_mesh(tmp_path):
    with pytest.raises(Exception):
        create_session(tmp_path / "nope.obj", n=16)
    assert list(tmp_path.iterdir()) == []  # nothing persisted


# -- edit commands ------------------------------------------------------------


def test_zero_amplitude_add_reports_region_but_changes_nothing(sess):
    pts = probe_points()
    before = sess.composite.eval_many(pts)
    d, (lo, hi) = sess.add_topology_deformer(0, DeformerParams(rho=0.0))
    assert np.all(lo < hi)  # a real region, reported anyway
    assert sess.revision == 1
    assert np.array_equal(sess.composite.eval_many(pts), before)


def test_add_then_remove_restores_bitwise(sess):
    pts = probe_points()
    before = sess.composite.eval_many(pts)
    d, _ = sess.add_topology_deformer(0)
    assert not np.array_equal(sess.composite.eval_many(pts), before)
    sess.remove_deformer(d.id)
    assert np.array_equal(sess.composite.eval_many(pts), before)
    assert sess.revision == 2


def test_retune_to_flip_threshold_zeroes_the_saddle(sess):
    s = sess.saddles[0]
    d, _ = sess.add_topology_deformer(0)  # default rho=5 flips the sign
    assert sess.composite.eval(s.position) < 0.0
    new, union_box = sess.retune_deformer(d.id, rho=3.375)
    assert abs(sess.composite.eval(s.position)) <= 1e-12
    assert new.id == d.id
    assert np.all(union_box[0] <= d.support_aabb()[0])


def test_geometry_deformer_through_the_session(sess):
    p = surface_anchor(sess)
    d, _ = sess.add_geometry_deformer(p, "bulge", rho=4.0)
    assert d.kind == "bulge" and sess.revision == 1
    moved, _ = sess.retune_deformer(d.id, radius=d.params["radius"] / 2.0, rho=4.0)
    assert np.array_equal(moved.weights, 0.5 * d.weights)


def test_command_errors_leave_state_untouched(sess):
    pts = probe_points(200)
    before = sess.composite.eval_many(pts)
    with pytest.raises(KeyError, match="saddle index"):
        sess.add_topology_deformer(99)
    with pytest.raises(KeyError, match="no deformer"):
        sess.retune_deformer(123, rho=1.0)
    with pytest.raises(KeyError, match="no deformer"):
        sess.remove_deformer(123)
    sess.add_topology_deformer(0)
    with pytest.raises(ValueError, match="mu and phi"):
        sess.retune_deformer(0, mu=-1.0)
    with pytest.raises(ValueError, match="bulge or concavity"):
        sess.add_geometry_deformer(surface_anchor(sess), "dimple")
    assert sess.revision == 1  # only the one successful add landed
    sess.remove_deformer(0)
    assert np.array_equal(sess.composite.eval_many(pts), before)


def test_deformer_ids_never_recycle(sess):
    d0, _ = sess.add_topology_deformer(0)
    sess.remove_deformer(d0.id)
    d1, _ = sess.add_topology_deformer(0)
    assert (d0.id, d1.id) == (0, 1)


# -- undo / redo --------------------------------------------------------------


def test_undo_redo_walks_the_edit_history(sess):
    pts = probe_points()
    states = [sess.composite.eval_many(pts)]
    d, _ = sess.add_topology_deformer(0)
    states.append(sess.composite.eval_many(pts))
    sess.retune_deformer(d.id, rho=2.0)
    states.append(sess.composite.eval_many(pts))
    sess.remove_deformer(d.id)
    states.append(sess.composite.eval_many(pts))
    assert sess.revision == 3

    for expect in (states[2], states[1], states[0]):
        assert sess.undo()
        assert np.array_equal(sess.composite.eval_many(pts), expect)
    assert not sess.undo()  # history exhausted
    assert sess.revision == 6  # undos are edits too

    for expect in (states[1], states[2], states[3]):
        assert sess.redo()
        assert np.array_equal(sess.composite.eval_many(pts), expect)
    assert not sess.redo()


def test_new_edit_clears_the_redo_stack(sess):
    d, _ = sess.add_topology_deformer(0)
    sess.retune_deformer(d.id, rho=1.0)
    assert sess.undo()
    sess.retune_deformer(d.id, rho=7.0)
    assert not sess.redo()


def test_history_cap_drops_oldest_entries(sess):
    d, _ = sess.add_topology_deformer(0)
    rhos = [1.0 + 0.01 * k for k in range(HISTORY_CAP + 4)]
    for r in rhos:
        sess.retune_deformer(d.id, rho=r)
    undone = 0
    while sess.undo():
        undone += 1
    assert undone == HISTORY_CAP
    # the four evicted retunes (plus the initial add) stay applied
    assert sess.deformer_by_id(d.id).params["rho"] == rhos[3]


def test_saddle_list_is_immutable_across_edits(sess):
    snapshot = [(p.cls, p.position.copy(), p.value) for p in sess.critical_points]
    sess.add_topology_deformer(0)
    sess.retune_deformer(0, rho=2.5)
    sess.undo()
    assert len(sess.critical_points) == len(snapshot)
    for p, (cls, pos, val) in zip(sess.critical_points, snapshot):
        assert p.cls == cls and np.array_equal(p.position, pos) and p.value == val


# -- persistence --------------------------------------------------------------


def test_save_load_save_is_bitwise_identical(sess, tmp_path):
    sess.add_topology_deformer(0)
    sess.add_geometry_deformer(surface_anchor(sess), "concavity", rho=3.0)
    # same filename in two directories: the envelope embeds the sidecar name
    (tmp_path / "first").mkdir()
    (tmp_path / "second").mkdir()
    p1 = tmp_path / "first" / "a.json"
    p2 = tmp_path / "second" / "a.json"
    save_session(sess, p1)
    loaded = load_session(p1)
    save_session(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert sidecar_path(p1).read_bytes() == sidecar_path(p2).read_bytes()


def test_loaded_session_replays_the_stack_bitwise(sess, tmp_path):
    sess.add_topology_deformer(0)
    sess.add_geometry_deformer(surface_anchor(sess), "bulge")
    path = tmp_path / "s.json"
    save_session(sess, path)
    loaded = load_session(path)
    pts = probe_points()
    assert np.array_equal(loaded.composite.eval_many(pts), sess.composite.eval_many(pts))
    assert loaded.next_deformer_id == sess.next_deformer_id
    assert [d.id for d in loaded.composite.deformers] == [0, 1]
    assert loaded.mesh_hash == sess.mesh_hash
    # fresh history: persistence stores state, not the undo log
    assert not loaded.undo() and not loaded.redo()


def test_sidecar_format_and_hash_guard(sess, tmp_path):
    path = tmp_path / "s.json"
    save_session(sess, path)
    side = sidecar_path(path)
    blob = side.read_bytes()
    assert blob[:4] == b"MFLD"
    assert len(blob) == 52 + (sess.spec.n + 1) ** 3 * 8
    envelope = json.loads(path.read_text())
    assert envelope["coeff_sidecar"]["sha256"] == hashlib.sha256(blob).hexdigest()
    assert envelope["format_version"] == 1

    side.write_bytes(blob[:-8] + b"\x00" * 8)  # corrupt the tail
    with pytest.raises(SessionError, match="hash mismatch"):
        load_session(path)
    side.write_bytes(blob[:100])
    with pytest.raises(SessionError, match="hash mismatch"):
        load_session(path)
    side.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(SessionError, match="hash mismatch"):
        load_session(path)


def test_load_rejects_missing_or_foreign_files(sess, tmp_path):
    with pytest.raises(SessionError, match="no such session"):
        load_session(tmp_path / "absent.json")
    path = tmp_path / "s.json"
    save_session(sess, path)
    envelope = json.loads(path.read_text())
    envelope["format_version"] = 99
    path.write_text(json.dumps(envelope))
    with pytest.raises(SessionError, match="unsupported session format"):
        load_session(path)


def test_save_leaves_no_temp_residue(sess, tmp_path):
    path = tmp_path / "s.json"
    save_session(sess, path)
    save_session(sess, path)  # overwrite path exercises os.replace
    names = sorted(f.name for f in tmp_path.iterdir())
    assert names == ["s.json", "s.json.coeff"]

    missing_dir = tmp_path / "nowhere" / "s.json"
    with pytest.raises(OSError):
        save_session(sess, missing_dir)
    assert sorted(f.name for f in tmp_path.iterdir()) == names
