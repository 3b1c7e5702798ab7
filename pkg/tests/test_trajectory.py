import json
import math
import warnings

import numpy as np
import pytest

from quasistate.trajectory import (Balanced, ConstantPure, Frozen, Piecewise, PowerMartingale,
                                   RandomFast, ShortWindowWarning, Trajectory, TrajectoryError,
                                   Window, WindowError, generate, load_trajectory,
                                   save_trajectory, sparse_readout, spec_from_dict, spec_to_dict,
                                   spin_array, tensor, windows)


def norms(traj):
    return np.sum(np.abs(traj.samples) ** 2, axis=1)


def test_constant_pure_is_basis_vector():
    traj = generate(ConstantPure(0), 2, 50, 0.1)
    assert np.array_equal(traj.samples, np.tile([1, 0], (50, 1)).astype(complex))


def test_balanced_plus():
    traj = generate(Balanced((1, 1)), 2, 10, 1.0)
    assert np.allclose(traj.samples, 1 / math.sqrt(2))


def test_balanced_minus_sign():
    traj = generate(Balanced((1, -1)), 2, 10, 1.0)
    assert np.allclose(traj.samples[:, 1], -1 / math.sqrt(2))


def test_random_fast_reproducible():
    a = generate(RandomFast(1.0), 2, 500, 1.0, seed=7)
    b = generate(RandomFast(1.0), 2, 500, 1.0, seed=7)
    c = generate(RandomFast(1.0), 2, 500, 1.0, seed=8)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert not np.array_equal(a.samples, c.samples)


@pytest.mark.parametrize("spec", [
    ConstantPure(1), Balanced(None), Frozen((0.6, 0.8j, 0)), RandomFast(5.0),
    PowerMartingale((0.2, 0.3, 0.5)),
    Piecewise(((0, ConstantPure(0)), (20, RandomFast(2.0)), (40, Balanced(None)))),
])
def test_generators_normalized(spec):
    traj = generate(spec, 3, 64, 0.5, seed=3)
    assert np.max(np.abs(norms(traj) - 1)) < 1e-9


def test_unknown_kind_rejected():
    with pytest.raises(TrajectoryError):
        generate({"kind": "wobble"}, 2, 10, 1.0)


def test_piecewise_schedule_out_of_range():
    with pytest.raises(TrajectoryError):
        generate(Piecewise(((0, ConstantPure(0)), (30, ConstantPure(1)))), 2, 20, 1.0)
    with pytest.raises(TrajectoryError):
        generate(Piecewise(((5, ConstantPure(0)),)), 2, 20, 1.0)


def test_constant_pure_index_checked():
    with pytest.raises(TrajectoryError):
        generate(ConstantPure(2), 2, 10, 1.0)


def test_trajectory_invariants():
    ok = np.tile([1.0, 0.0], (3, 1))
    with pytest.raises(TrajectoryError):
        Trajectory(0.0, ok)
    with pytest.raises(TrajectoryError):
        Trajectory(1.0, ok[:1])
    with pytest.raises(TrajectoryError):
        Trajectory(1.0, ok, t_c=0.5)
    with pytest.raises(TrajectoryError):
        Trajectory(1.0, ok * 2)
    # flagged unnormalized data is accepted
    assert Trajectory(1.0, ok * 2, unnormalized=True).steps == 3


def test_samples_read_only():
    traj = generate(ConstantPure(0), 2, 4, 1.0)
    with pytest.raises(ValueError):
        traj.samples[0, 0] = 0


@pytest.mark.parametrize("n,length,starts", [
    (10, 3, [0, 3, 6]),
    (9, 3, [0, 3, 6]),
    (5, 5, [0]),
])
def test_window_tiling(n, length, starts):
    traj = generate(ConstantPure(0), 2, n, 1.0)
    ws = windows(traj, length, kappa=0)
    assert [w.start for w in ws] == starts
    assert all(w.length == length for w in ws)


def test_window_longer_than_trajectory():
    traj = generate(ConstantPure(0), 2, 5, 1.0)
    with pytest.raises(WindowError):
        windows(traj, 6)


def test_short_window_warns():
    traj = generate(RandomFast(5.0), 2, 100, 1.0)
    with pytest.warns(ShortWindowWarning):
        windows(traj, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        windows(traj, 50)


def test_window_check():
    traj = generate(ConstantPure(0), 2, 5, 1.0)
    with pytest.raises(WindowError):
        Window(3, 3).check(traj)
    with pytest.raises(WindowError):
        Window(0, 0)


def test_tensor_basis_product():
    a = generate(ConstantPure(0), 2, 4, 1.0)
    b = generate(ConstantPure(1), 2, 4, 1.0)
    ab = tensor(a, b)
    assert np.array_equal(ab.samples[0], [0, 1, 0, 0])


def test_tensor_dims_labels_norm():
    a = generate(RandomFast(1.0), 2, 30, 1.0, seed=1)
    b = generate(RandomFast(1.0), 3, 30, 1.0, seed=2)
    ab = tensor(a, b)
    assert ab.dim == 6
    assert ab.basis_labels[:3] == ("0⊗0", "0⊗1", "0⊗2")
    assert ab.basis_labels[3] == "1⊗0"
    assert np.max(np.abs(norms(ab) - 1)) < 1e-9


def test_tensor_mismatch():
    a = generate(ConstantPure(0), 2, 4, 1.0)
    with pytest.raises(TrajectoryError):
        tensor(a, generate(ConstantPure(0), 2, 5, 1.0))
    with pytest.raises(TrajectoryError):
        tensor(a, generate(ConstantPure(0), 2, 4, 0.5))


def test_csv_round_trip_lossless(tmp_path):
    traj = generate(RandomFast(3.0), 3, 40, 0.25, seed=11)
    path = save_trajectory(traj, tmp_path / "traj.csv")
    back = load_trajectory(path)
    assert back == traj
    assert back.samples.tobytes() == traj.samples.tobytes()
    assert path.read_text().splitlines()[0] == "t,re_0,im_0,re_1,im_1,re_2,im_2"


def test_serialized_bytes_reproducible(tmp_path):
    a = save_trajectory(generate(RandomFast(2.0), 2, 30, 1.0, seed=4), tmp_path / "a.csv")
    b = save_trajectory(generate(RandomFast(2.0), 2, 30, 1.0, seed=4), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_spec_dict_round_trip():
    spec = Piecewise(((0, ConstantPure(0)), (10, PowerMartingale((0.5, 0.5), None, 8))))
    data = json.loads(json.dumps(spec_to_dict(spec)))
    assert spec_from_dict(data) == spec


def test_sparse_readout_one_per_window():
    traj = generate(RandomFast(1.0), 2, 20, 1.0, seed=0)
    got = sparse_readout(traj, 5, offset=2)
    assert np.array_equal(got, traj.samples[[2, 7, 12, 17]])


def test_spin_array_regimes():
    pure = spin_array("pure", 4, 20, 1.0, seed=1)
    assert all(np.max(np.abs(s.samples)) == 1 for s in pure)
    mixed = spin_array("mixed", 5, 20, 1.0, seed=1, n_pure=2)
    powers = [s.powers()[0] for s in mixed]
    assert all(max(p) == 1 for p in powers[:2])
    assert all(abs(max(p) - 0.55) < 1e-12 for p in powers[2:])
    with pytest.raises(TrajectoryError):
        spin_array("stripes", 2, 20, 1.0)
