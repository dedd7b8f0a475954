"""Acceptance suite: every release criterion, one test each, with a
printed PASS/FAIL line per criterion (run with -s to watch them live).

Expected values come from independent oracles computed here (binomial
bounds, factorial brute force, grid search, closed-loop simulation), never
from the code paths under test.
"""

import itertools
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from specksim.config import scenario_from_dict
from specksim.dynamics import (
    ControllerGains,
    KinematicState,
    PositionController,
    default_calibration_curve,
    integrate,
    thrust_to_force,
)
from specksim.engine import run
from specksim.haptics import (
    ChainMember,
    ChainMode,
    ContactChain,
    Feedback,
    HalfSpace,
    Sphere,
    classify_feedback,
    combine_parallel,
    combine_series,
    penetration,
    render_force,
)
from specksim.localization import (
    Anchor,
    AnchorSet,
    RangingModel,
    simulate_range,
    trilaterate,
)
from specksim.metrics import AIRBORNE_ROLES, measure_period, parse_trajectory
from specksim.pointcloud import downsample, hausdorff, load_pointcloud
from specksim.swarm import CirclePlane, assign_targets
from specksim.transport import Network, NetworkConfig
from specksim.vec import ZERO, dist, norm

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number:02d}: {description}")
        raise
    print(f"[PASS] criterion {number:02d}: {description}")


def standard_apf_scenario(**overrides):
    """20 drones, random starts in the 4 m volume, 20 downsampled targets."""
    data = {
        "seed": 42,
        "duration": 35.0,
        "dt": 0.01,
        "mode": "pointcloud_render",
        "swarm": {
            "illuminating": 20,
            "standby": 0,
            "apf": {"k_att": 2.0, "k_rep": 0.05, "d0": 0.5,
                    "safety_radius": 0.1, "v_max": 1.0},
            "heartbeat": {"period": 0.5, "miss_limit": 3},
            "volume": {"min": [-2.0, -2.0, 0.0], "max": [2.0, 2.0, 4.0]},
        },
        "pointcloud": {"path": str(SCENARIOS / "sample_cloud.xyz"), "count": 20},
    }
    data.update(overrides)
    return scenario_from_dict(data)


def cloud_targets(count=20):
    cloud = load_pointcloud(SCENARIOS / "sample_cloud.xyz")
    return downsample(cloud, count).points


def frame_hausdorff(frame, targets):
    keep = [i for i, r in enumerate(frame.roles) if r in AIRBORNE_ROLES]
    return hausdorff(frame.positions[keep], targets)


# -- 1: determinism -----------------------------------------------------------


def test_criterion_01_determinism_and_runtime():
    with criterion(1, "same seed twice gives byte-identical logs, "
                      "20 drones x 60 s under 60 s wall"):
        cfg = standard_apf_scenario(duration=60.0)
        t0 = time.perf_counter()
        a = run(cfg)
        first = time.perf_counter() - t0
        b = run(standard_apf_scenario(duration=60.0))
        assert first < 60.0, f"run took {first:.1f} s"
        assert a.trajectory_log.encode() == b.trajectory_log.encode()
        assert a.role_log.encode() == b.role_log.encode()


# -- 2: transport statistics --------------------------------------------------


def test_criterion_02_transport_statistics():
    with criterion(2, "drop count in the 3-sigma binomial band, jitter "
                      "reorders, clean link stays FIFO"):
        net = Network(NetworkConfig(loss_probability=0.2, base_delay=0.001),
                      rng=np.random.default_rng(17))
        net.register("a")
        net.register("b")
        for i in range(10_000):
            net.send("a", "b", b"x", now=i * 0.01)
        dropped = net.stats().dropped
        assert 1880 <= dropped <= 2120, dropped  # 2000 +/- 3*sqrt(n*p*(1-p))

        jittery = Network(
            NetworkConfig(loss_probability=0.0, base_delay=0.01, jitter=0.1),
            rng=np.random.default_rng(5))
        jittery.register("a")
        jittery.register("b")
        for i in range(2000):
            jittery.send("a", "b", b"x", now=i * 0.001)  # gap << jitter
        jittery.poll("b", now=1e9)
        assert jittery.stats().reordered > 0

        clean = Network(NetworkConfig(loss_probability=0.0, jitter=0.0,
                                      base_delay=0.01),
                        rng=np.random.default_rng(5))
        clean.register("a")
        clean.register("b")
        for i in range(2000):
            clean.send("a", "b", b"x", now=i * 0.001)
        clean.poll("b", now=1e9)
        assert clean.stats().reordered == 0


# -- 3: integral wind-up ------------------------------------------------------


def simulate_press_release(gains, hold=0.1, hold_time=2.0, total=6.0,
                           dt=0.001):
    """Hold the drone displaced from its setpoint, then let go.

    Returns (positions, times) after the release instant.
    """
    ctl = PositionController(gains)
    steps_hold = int(round(hold_time / dt))
    for _ in range(steps_hold):
        ctl.step((-hold, 0.0, 0.0), dt)  # pinned: error constant, rate zero
    state = KinematicState(position=(hold, 0.0, 0.0))
    xs, ts = [], []
    t = hold_time
    while t < total:
        force = ctl.step((-state.position[0], -state.position[1],
                          -state.position[2]), dt)
        accel = tuple(f / gains.mass for f in force)
        state = integrate(state, accel, dt)
        t += dt
        xs.append(state.position[0])
        ts.append(t)
    return np.array(xs), np.array(ts)


def test_criterion_03_windup_reproduction():
    with criterion(3, "unclamped integral overshoots PD by >= 20% after a "
                      "held push, PD settles to 2% within 2 s"):
        pd_gains = ControllerGains(kp=10.0, kd=1.0, ki=0.0, mass=0.05)
        pid_gains = ControllerGains(kp=10.0, kd=1.0, ki=2.0,
                                    integral_clamp=math.inf, mass=0.05)
        xs_pd, ts = simulate_press_release(pd_gains)
        xs_pid, _ = simulate_press_release(pid_gains)
        overshoot_pd = max(0.0, float(-xs_pd.min()))
        overshoot_pid = max(0.0, float(-xs_pid.min()))
        assert overshoot_pd > 0.0
        assert overshoot_pid >= 1.2 * overshoot_pd, (
            f"PID {overshoot_pid:.4f} vs PD {overshoot_pd:.4f}")
        # PD settles: inside the 2% band (of the 0.1 m push) and stays there
        band = 0.02 * 0.1
        outside = np.abs(xs_pd) > band
        settle_time = float(ts[int(np.nonzero(outside)[0].max()) + 1]) \
            if outside.any() else float(ts[0])
        assert settle_time - 2.0 <= 2.0, f"settled at {settle_time:.2f} s"


# -- 4: force calibration noise ------------------------------------------------


def test_criterion_04_force_calibration_noise():
    with criterion(4, "3000 samples at 90% thrust spread 0.43 N +/- 5%, "
                      "mean force monotone"):
        curve = default_calibration_curve()
        rng = np.random.default_rng(2024)
        samples = [thrust_to_force(curve, 0.9, rng) for _ in range(3000)]
        std = float(np.std(samples, ddof=1))
        assert 0.43 * 0.95 <= std <= 0.43 * 1.05, std
        means = [thrust_to_force(curve, u) for u in np.linspace(0, 1, 201)]
        assert all(b >= a for a, b in zip(means, means[1:]))


# -- 5: haptic force law ----------------------------------------------------------


def test_criterion_05_haptic_force_law():
    with criterion(5, "|F| = kp*depth exactly, zero force outside over 1e6 "
                      "points, parallel adds, series matches parallel"):
        gains = ControllerGains(kp=10.0, kd=0.0)
        wall = HalfSpace(point=ZERO, normal=(0.0, 0.0, 1.0))
        for depth in (1e-9, 3e-4, 0.02, 0.5):
            report = penetration(wall, (0.3, -0.2, -depth))
            force = render_force(report, 0.0, gains)
            assert abs(norm(force) - gains.kp * report.depth) <= 1e-12

        ball = Sphere(center=ZERO, radius=0.5)
        rng = np.random.default_rng(99)
        zs = rng.uniform(0.0, 2.0, size=500_000)
        xy = rng.uniform(-3.0, 3.0, size=(500_000, 2))
        for i in range(500_000):
            p = (xy[i, 0], xy[i, 1], zs[i])
            r = penetration(wall, p)
            assert r.depth == 0.0 and render_force(r, 1.0, gains) == ZERO
        radii = rng.uniform(0.5000001, 3.0, size=500_000)
        dirs = rng.normal(size=(500_000, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        pts = dirs * radii[:, None]
        for i in range(500_000):
            p = (pts[i, 0], pts[i, 1], pts[i, 2])
            r = penetration(ball, p)
            assert r.depth == 0.0 and render_force(r, 1.0, gains) == ZERO

        d = (0.04, 0.01, 0.0)
        single = combine_parallel(ContactChain(ChainMode.PARALLEL, [
            ChainMember("f0", d, ZERO, gains)]))
        for n in range(2, 6):
            members = [ChainMember(f"f{i}", d, ZERO, gains) for i in range(n)]
            par = combine_parallel(ContactChain(ChainMode.PARALLEL, members))
            ser = combine_series(ContactChain(ChainMode.SERIES, members))
            assert par == pytest.approx(
                tuple(n * v for v in single), rel=1e-12)
            assert ser == pytest.approx(par, rel=1e-12)


# -- 6: tactile threshold ---------------------------------------------------------


def test_criterion_06_tactile_threshold():
    with criterion(6, "tactile strictly below 1 N, kinesthetic at and above"):
        assert classify_feedback((0.999, 0.0, 0.0)) is Feedback.TACTILE
        assert classify_feedback((1.0, 0.0, 0.0)) is Feedback.KINESTHETIC
        assert classify_feedback((1.001, 0.0, 0.0)) is Feedback.KINESTHETIC


# -- 7: localization ----------------------------------------------------------------


def cube_anchor_set(side=2.0):
    pts = [(x, y, z) for x in (0.0, side) for y in (0.0, side)
           for z in (0.0, side)]
    return AnchorSet(anchors=[Anchor(id=f"a{i}", position=p)
                              for i, p in enumerate(pts)])


def grid_oracle(positions, ranges, lo, hi, final_step=0.001):
    """Derivative-free coarse-to-fine grid minimizer, refined to 1 mm."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    step = float(np.max(hi - lo)) / 10.0
    while True:
        axes = [np.arange(lo[i], hi[i] + step / 2, step) for i in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        cost = np.sum(
            (np.linalg.norm(pts[:, None, :] - positions[None, :, :], axis=2)
             - ranges[None, :]) ** 2, axis=1)
        best = pts[int(np.argmin(cost))]
        if step <= final_step:
            return best
        lo, hi = best - 2.0 * step, best + 2.0 * step
        step = max(step / 5.0, final_step)


def test_criterion_07_localization():
    with criterion(7, "exact recovery 100/100, noisy RMSE <= 2x grid oracle "
                      "over 500 trials, 1 m ranging error in the 5-15 cm band"):
        anchors = cube_anchor_set()
        positions = anchors.positions()
        rng = np.random.default_rng(31)
        for _ in range(100):
            p = rng.uniform(0.1, 1.9, size=3)
            est = trilaterate(anchors, np.linalg.norm(positions - p, axis=1))
            assert np.linalg.norm(np.array(est.position) - p) < 1e-6

        rng = np.random.default_rng(7)
        sq_gn, sq_oracle = [], []
        for _ in range(500):
            p = rng.uniform(0.3, 1.7, size=3)
            ranges = (np.linalg.norm(positions - p, axis=1)
                      + rng.normal(0.0, 0.05, size=len(positions)))
            est = trilaterate(anchors, ranges)
            sq_gn.append(np.sum((np.array(est.position) - p) ** 2))
            oracle = grid_oracle(positions, ranges, (0, 0, 0), (2, 2, 2))
            sq_oracle.append(np.sum((oracle - p) ** 2))
        rmse_gn = math.sqrt(float(np.mean(sq_gn)))
        rmse_oracle = math.sqrt(float(np.mean(sq_oracle)))
        assert rmse_gn <= 2.0 * rmse_oracle, (rmse_gn, rmse_oracle)

        model = RangingModel()  # sigma=0.05, bias 0.05/m from the 0.1 m calib
        rng = np.random.default_rng(99)
        mae = float(np.mean([abs(simulate_range(model, 1.0, rng) - 1.0)
                             for _ in range(10_000)]))
        assert 0.05 <= mae <= 0.15, mae


# -- 8: assignment optimality --------------------------------------------------------


def test_criterion_08_assignment_optimality():
    with criterion(8, "matches factorial brute force on 50 seeded instances, "
                      "always injective"):
        rng = np.random.default_rng(404)
        for _ in range(50):
            n = int(rng.integers(2, 8))
            fls = [tuple(p) for p in rng.uniform(-2, 2, size=(n, 3))]
            targets = [tuple(p) for p in rng.uniform(-2, 2, size=(n, 3))]
            a = assign_targets(fls, targets)
            assert len(set(a.mapping.values())) == n
            best = min(
                sum(dist(fls[i], targets[j]) for j, i in enumerate(perm))
                for perm in itertools.permutations(range(n)))
            assert a.total_cost(fls, targets) == pytest.approx(best, rel=1e-9)


# -- 9: potential-field safety scenario ------------------------------------------------


def test_criterion_09_apf_safety_scenario():
    with criterion(9, "20-drone render: zero collisions, everyone within "
                      "2 cm by t=30 s, min separation >= 0.1 m, under 10 s wall"):
        t0 = time.perf_counter()
        result = run(standard_apf_scenario())
        wall = time.perf_counter() - t0
        assert wall < 10.0, f"{wall:.1f} s"
        m = result.metrics
        assert m.collision_events == 0
        assert m.min_pairwise_distance >= 0.1
        targets = cloud_targets()
        frames = parse_trajectory(result.trajectory_log)
        late = [f for f in frames if f.time >= 30.0]
        assert late and max(frame_hausdorff(f, targets) for f in late) <= 0.02


# -- 10: circle formation ---------------------------------------------------------------


def test_criterion_10_circle_formation():
    with criterion(10, "3 drones, r=0.5 m at 1 m/s in all three planes: "
                       "tracking RMS <= 5 cm, period pi +/- dt"):
        for plane in ("xy", "xz", "slant45"):
            cfg = scenario_from_dict({
                "seed": 11, "duration": 13.0, "dt": 0.01,
                "mode": "circle_formation",
                "swarm": {"illuminating": 3},
                "circle": {"radius": 0.5, "speed": 1.0, "plane": plane,
                           "center": [0.0, 0.0, 1.0]},
            })
            result = run(cfg)
            assert result.metrics.tracking_rms <= 0.05, plane
            frames = parse_trajectory(result.trajectory_log)
            period = measure_period(frames, CirclePlane(plane),
                                    (0.0, 0.0, 1.0), "fls000",
                                    warmup=math.pi)
            assert abs(period - math.pi) <= cfg.dt, (plane, period)


# -- 11: failure handling -------------------------------------------------------------------


def test_criterion_11_failure_handling():
    with criterion(11, "two crashes: standbys re-cover both targets within "
                       "10 s, final shape within 1.2x of the no-fault run; "
                       "empty pool degrades cleanly"):
        crashed = ["fls003", "fls011"]
        faulted = standard_apf_scenario(
            duration=60.0,
            swarm={
                "illuminating": 20, "standby": 4,
                "apf": {"k_att": 2.0, "k_rep": 0.05, "d0": 0.5,
                        "safety_radius": 0.1, "v_max": 1.0},
                "heartbeat": {"period": 0.5, "miss_limit": 3},
                "volume": {"min": [-2.0, -2.0, 0.0], "max": [2.0, 2.0, 4.0]},
            },
            faults=[{"time": 10.0, "fls": 3}, {"time": 10.0, "fls": 11}])
        result = run(faulted)
        baseline = run(standard_apf_scenario(duration=60.0))
        takeovers = [l for l in result.role_log.splitlines()
                     if "standby illuminating takeover" in l]
        assert len(takeovers) == 2

        targets = cloud_targets()
        frames = parse_trajectory(result.trajectory_log)
        before = [f for f in frames if f.time < 10.0][-1]
        for drone in crashed:
            held = before.positions[before.ids.index(drone)]
            t_idx = int(np.argmin(np.linalg.norm(targets - held, axis=1)))
            covered_at = None
            for f in frames:
                if f.time <= 10.0:
                    continue
                keep = [i for i, r in enumerate(f.roles)
                        if r in AIRBORNE_ROLES]
                gap = np.linalg.norm(
                    f.positions[keep] - targets[t_idx], axis=1).min()
                if gap <= 0.05:
                    covered_at = f.time
                    break
            assert covered_at is not None and covered_at <= 20.0, (
                f"{drone} target re-covered at {covered_at}")

        assert result.metrics.hausdorff <= 1.2 * baseline.metrics.hausdorff

        bare = standard_apf_scenario(
            duration=60.0,
            faults=[{"time": 10.0, "fls": 3}, {"time": 10.0, "fls": 11}])
        degraded = run(bare)
        assert degraded.metrics.uncovered_target_seconds > 0.0


# -- 12: charging lifecycle ---------------------------------------------------------------------


def test_criterion_12_charging_lifecycle():
    with criterion(12, "10,000 s with a 600 s battery and 60 s reserve: no "
                       "airborne deaths, every charger trip starts above "
                       "the reserve"):
        cfg = scenario_from_dict({
            "seed": 5, "duration": 10_000.0, "dt": 0.1,
            "mode": "pointcloud_render", "log_every": 50,
            "swarm": {
                "illuminating": 6, "standby": 4,
                "heartbeat": {"period": 1.0, "miss_limit": 3},
                "charging": {"drain_rate": 1.0, "recharge_rate": 5.0,
                             "reserve": 60.0,
                             "charger_position": [0.0, 0.0, 3.8],
                             "full_battery": 600.0},
                "initial_battery_stagger": 83.0,
            },
            "pointcloud": {"points": [
                [-1.2, -0.6, 1.8], [-0.6, 0.9, 2.2], [0.0, -0.9, 1.5],
                [0.6, 0.6, 2.5], [1.2, -0.3, 1.9], [0.0, 0.0, 2.9]],
                "count": 6},
        })
        result = run(cfg)
        assert result.metrics.airborne_battery_deaths == 0
        trips = 0
        for line in result.role_log.splitlines():
            if " illuminating to_charger " in line:
                trips += 1
                reason = line.split(maxsplit=4)[4]
                battery = float(reason.split("battery=")[1].split(",")[0])
                assert battery >= 60.0, line
        assert trips > 50  # the lifecycle actually cycled many times
        assert not any(" failed " in l and "battery" in l
                       for l in result.role_log.splitlines())
