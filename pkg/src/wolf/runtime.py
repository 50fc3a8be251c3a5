"""Control-loop orchestration.

Tick pipeline (fixed order, auditable from the diagnostics):
sensors -> estimation -> gait clock -> push detection -> foothold
planning for legs entering swing -> step reflex -> task/constraint
assembly -> hierarchical QP -> torque recovery. A scenario runner
closes the loop around the simulator and writes CSV telemetry.
"""

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import footstep, reactive
from .config import WolfConfig, set_param
from .estimation import StateEstimator
from .gait import BUILTIN_GAITS, GaitSchedule, make_gait
from .model import GRAVITY, LEG_NAMES
from .rotations import quat_from_yaw, quat_mul, rot_to_quat, rot_z, yaw_of
from .sim import NoiseConfig, Simulator, Terrain, equilibrium_start
from .wbid import (ControlMode, References, UnsupportedPhaseError,
                   build_constraints, build_tasks, min_jerk_waypoint,
                   recover_torques, solve_hierarchy)


@dataclass
class TwistCommand:
    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0
    stamp: float = -1e9

    def magnitude(self):
        return abs(self.vx) + abs(self.vy) + abs(self.wz)

    def as_array(self):
        return np.array([self.vx, self.vy, self.wz])


class CommandSources:
    """Mailboxes written by the bridge/scenario, read once per tick.

    The operator twist preempts navigation whenever fresh and non-zero;
    stale sources count as absent. Discrete commands queue.
    """

    def __init__(self, staleness_timeout=0.5, operator_latch=False):
        self.operator = TwistCommand()
        self.navigation = TwistCommand()
        self.staleness_timeout = staleness_timeout
        self.operator_latch = operator_latch
        self._latched = False
        self.queue = []          # (kind, payload) discrete commands

    def put_twist(self, vx, vy, wz, stamp, source="operator"):
        cmd = TwistCommand(float(vx), float(vy), float(wz), stamp)
        if source == "operator":
            self.operator = cmd
            if self.operator_latch and cmd.magnitude() > 0.0:
                self._latched = True
        else:
            self.navigation = cmd

    def put(self, kind, payload):
        self.queue.append((kind, payload))

    def drain(self):
        out = self.queue
        self.queue = []
        return out

    def arbitrate(self, now):
        """Active twist: operator if fresh and non-zero, else navigation,
        else zero."""
        op_fresh = (now - self.operator.stamp) <= self.staleness_timeout
        nav_fresh = (now - self.navigation.stamp) <= self.staleness_timeout
        if op_fresh and (self.operator.magnitude() > 0.0 or
                         (self.operator_latch and self._latched)):
            return self.operator.as_array(), "operator"
        if self.operator_latch and self._latched and op_fresh:
            return self.operator.as_array(), "operator"
        if nav_fresh:
            return self.navigation.as_array(), "navigation"
        return np.zeros(3), "none"


@dataclass
class TickDiagnostics:
    tick: int
    time: float
    solve_ms: float
    level_costs: dict
    qp_iterations: int
    events: list
    active_twist: np.ndarray
    twist_source: str
    contacts_wbid: list
    fall: bool
    fault: bool


@dataclass
class LegRuntime:
    trajectory: object = None
    swing_elapsed: float = 0.0
    traj_start_time: float = 0.0
    reflexed: bool = False
    promoted: bool = False      # early touchdown: treated as stance
    probe_depth: float = 0.0
    probe_anchor: np.ndarray = None


class Controller:
    """Owns estimator, gait clock, per-leg swing state, and references."""

    def __init__(self, model, config: WolfConfig, initial_cfg):
        self.model = model
        self.config = config
        self.estimator = StateEstimator(
            model, initial_cfg,
            contact_threshold=config.estimation.contact_threshold,
            hysteresis=config.estimation.hysteresis,
            velocity_cutoff_hz=config.estimation.velocity_cutoff_hz,
            use_contact_sensors=config.estimation.use_contact_sensors)
        gait0 = make_gait(config.gait.name, config.gait.period,
                          config.gait.duty, config.gait.offsets)
        self.gait = GaitSchedule(gait0)
        self.legs = [LegRuntime() for _ in range(4)]
        self.prev_sched_stance = np.ones(4, dtype=bool)
        self.mode = (ControlMode.MANIPULATION
                     if config.wbid.mode == "manipulation" else ControlMode.WALKING)
        # references seeded on the first tick
        self.com_ref_xy = None
        self.yaw_ref = None
        self.com_height_nominal = None
        self.arm_hold = None         # (pos, quat) in the anchor frame
        self.arm_waypoint = None     # (p0, q0, p1, q1, T, t0)
        self.push_active = False
        self.capture = np.zeros(2)
        self.fault_count = 0
        self.fault_stop = False
        self.last_tau = np.zeros(model.n_joints)
        self.tick = 0
        self.time = 0.0

    # -- discrete commands --------------------------------------------------

    def _handle_command(self, kind, payload, state, events):
        if kind == "gait":
            name = payload["name"]
            gait = make_gait(name, self.config.gait.period
                             if name == self.config.gait.name else None)
            self.gait.request_gait(gait)
            events.append(f"gait_request:{name}")
        elif kind == "mode":
            new_mode = (ControlMode.MANIPULATION
                        if payload["mode"] == "manipulation" else ControlMode.WALKING)
            if new_mode != self.mode:
                self._rebase_arm_target(state, new_mode)
                self.mode = new_mode
                events.append(f"mode:{payload['mode']}")
        elif kind == "arm_target":
            if self.model.has_arm and state.kin.p_ee is not None:
                p0, q0 = self._current_arm_pose(state)
                p1 = np.asarray(payload["position"], dtype=float)
                q1 = np.asarray(payload.get("orientation", [1, 0, 0, 0]), dtype=float)
                T = float(payload.get("duration", 2.0))
                self.arm_waypoint = (p0, q0, p1, q1, max(T, 0.1), self.time)
                events.append("arm_target")
        elif kind == "param":
            try:
                set_param(self.config, payload["key"], payload["value"])
                events.append(f"param:{payload['key']}")
            except (KeyError, TypeError, ValueError) as exc:
                events.append(f"param_rejected:{exc}")

    def _anchor_pose(self, state, mode):
        """World pose of the arm anchor frame for a mode."""
        if mode == ControlMode.WALKING:
            return state.cfg.base_pos.copy(), state.cfg.base_quat.copy()
        yaw = yaw_of(state.horizontal_quat)
        pos = np.array([state.cfg.base_pos[0], state.cfg.base_pos[1], 0.0])
        pos[2] = state.plane.height_at(pos[0], pos[1])
        return pos, quat_from_yaw(yaw)

    def _current_arm_pose(self, state):
        """Current EE pose expressed in the active anchor frame."""
        from .rotations import quat_conj, quat_to_rot
        pos_a, quat_a = self._anchor_pose(state, self.mode)
        R_a = quat_to_rot(quat_a)
        p_rel = R_a.T @ (state.kin.p_ee - pos_a)
        q_rel = quat_mul(quat_conj(quat_a), rot_to_quat(state.kin.R_ee))
        return p_rel, q_rel

    def _rebase_arm_target(self, state, new_mode):
        """Re-express targets so a mode switch does not move the arm."""
        if not self.model.has_arm:
            return
        old_mode = self.mode
        self.mode = new_mode
        if self.arm_waypoint is not None:
            p0, q0, p1, q1, T, t0 = self.arm_waypoint
            # world pose of the in-flight target under the old anchor
            from .rotations import quat_to_rot
            pos_a, quat_a = self._anchor_pose(state, old_mode)
            R_a = quat_to_rot(quat_a)
            p1_w = pos_a + R_a @ p1
            q1_w = quat_mul(quat_a, q1)
            pos_b, quat_b = self._anchor_pose(state, new_mode)
            R_b = quat_to_rot(quat_b)
            from .rotations import quat_conj
            p1_new = R_b.T @ (p1_w - pos_b)
            q1_new = quat_mul(quat_conj(quat_b), q1_w)
            p0_new, q0_new = self._current_arm_pose(state)
            self.arm_waypoint = (p0_new, q0_new, p1_new, q1_new, T, t0)
        else:
            self.arm_hold = self._current_arm_pose(state)
        self.mode = old_mode

    # -- per-tick pipeline ----------------------------------------------------

    def control_step(self, sensors, sources, dt):
        """One tick; returns (tau, TickDiagnostics)."""
        t_start = time.perf_counter()
        self.tick += 1
        self.time += dt
        events = []
        cfgc = self.config

        # 1. estimation
        state = self.estimator.update(sensors, dt)
        events += state.events

        # 2. command intake
        twist_body, source = sources.arbitrate(self.time)
        for kind, payload in sources.drain():
            self._handle_command(kind, payload, state, events)

        # 3. gait clock
        events += self.gait.advance(dt)
        cs = self.gait.contact_state()
        sched_stance = cs.stance

        # references seeded on first tick
        if self.com_ref_xy is None:
            self.com_ref_xy = state.com[:2].copy()
            self.yaw_ref = yaw_of(state.horizontal_quat)
            self.com_height_nominal = state.com_height
            if self.model.has_arm:
                self.arm_hold = self._current_arm_pose(state)

        yaw_est = yaw_of(state.horizontal_quat)
        twist_world = rot_z(yaw_est)[:2, :2] @ twist_body[:2]

        # 4. reactive: push detection on the continuously updated hull
        push_now = False
        if cfgc.reactive.push_recovery_enabled:
            push_now = reactive.detect_push(state.com[:2], state.active_polygon,
                                            cfgc.reactive.sigma)
        if push_now and not self.push_active:
            events.append("push_detected")
        self.push_active = push_now
        self.capture = (reactive.capture_delta(state.icp, state.polygon_center,
                                               cfgc.reactive.max_delta)
                        if push_now else np.zeros(2))

        # 5. swing bookkeeping and foothold planning at lift-off
        entering_swing = self.prev_sched_stance & ~sched_stance
        entering_stance = ~self.prev_sched_stance & sched_stance
        self.prev_sched_stance = sched_stance.copy()
        for g in np.flatnonzero(entering_stance):
            leg = self.legs[g]
            leg.trajectory = None
            leg.promoted = False
            leg.probe_depth = 0.0
            leg.probe_anchor = None
        for g in np.flatnonzero(entering_swing):
            self._plan_swing(g, state, twist_world, twist_body[2], events)

        # 6. reflex for swinging legs
        for g in range(4):
            leg = self.legs[g]
            if sched_stance[g] or leg.trajectory is None or leg.promoted:
                if not sched_stance[g] and leg.trajectory is not None:
                    leg.swing_elapsed += dt
                continue
            leg.swing_elapsed += dt
            s_traj = self._traj_phase(leg)
            if state.contacts[g]:
                decision = reactive.step_reflex(
                    s_traj, True, leg.trajectory,
                    state.feet[g], cfgc.reactive,
                    already_reflexed=leg.reflexed, plane=state.plane)
                if decision.kind == "reflex":
                    leg.trajectory = decision.trajectory
                    leg.traj_start_time = leg.swing_elapsed
                    leg.reflexed = True
                    events.append(f"reflex:{LEG_NAMES[g]}")
                elif decision.kind == "early_touchdown":
                    leg.promoted = True
                    events.append(f"early_touchdown:{LEG_NAMES[g]}")

        # 7. references
        refs = self._build_references(state, cs, twist_world, twist_body, dt)

        # 8-9. whole-body solve. Support set comes from the schedule:
        # force-based flags chatter while legs unload, and feeding that
        # back into the QP rocks the robot. A leg clearly above the
        # terrain (late touchdown) is excluded geometrically instead.
        foot_height = np.array([
            state.feet[g, 2] - state.plane.height_at(state.feet[g, 0],
                                                     state.feet[g, 1])
            for g in range(4)])
        airborne = (foot_height > 0.005) & ~state.contacts
        promoted = np.array([leg.promoted for leg in self.legs])
        wbid_contacts = (sched_stance & ~airborne) | (promoted & state.contacts)
        state_w = dataclasses.replace(state, contacts=wbid_contacts)
        fault = False
        solve_ms = 0.0
        costs = {}
        iters = 0
        try:
            tasks = build_tasks(self.model, state_w, refs, self.mode,
                                cfgc.wbid.gains)
            cset = build_constraints(self.model, state_w, state.plane,
                                     dt, mu=cfgc.wbid.mu)
            res = solve_hierarchy(tasks, cset)
        except UnsupportedPhaseError as exc:
            res = None
            events.append(f"unsupported_phase:{exc}")
        self.last_solution = res
        if res is not None and res.ok:
            tau = recover_torques(self.model, state_w.kin, res.qdd, res.forces)
            self.last_tau = tau
            self.fault_count = 0
            self.fault_stop = False
            costs = res.level_costs
            iters = res.iterations
        else:
            self.fault_count += 1
            fault = True
            if res is not None:
                events.append(f"qp_infeasible:level{res.failing_level}")
            if self.fault_count <= cfgc.runtime.fault_hold_ticks:
                tau = self.last_tau
                events.append("fault_hold")
            else:
                if not self.fault_stop:
                    self.fault_stop = True
                    self.gait.request_gait(BUILTIN_GAITS["stand"])
                    events.append("fault_stop")
                tau = -cfgc.runtime.fault_damping * state.cfg.qd
        solve_ms = (time.perf_counter() - t_start) * 1e3

        diag = TickDiagnostics(
            tick=self.tick, time=self.time, solve_ms=solve_ms,
            level_costs=costs, qp_iterations=iters, events=events,
            active_twist=twist_body.copy(), twist_source=source,
            contacts_wbid=[int(c) for c in wbid_contacts],
            fall=False, fault=fault)
        return tau, state, diag

    def _traj_phase(self, leg):
        return min(max((leg.swing_elapsed - leg.traj_start_time)
                       / leg.trajectory.duration, 0.0), 1.0)

    def _plan_swing(self, g, state, twist_world, wz, events):
        leg = self.legs[g]
        leg.swing_elapsed = 0.0
        leg.traj_start_time = 0.0
        leg.reflexed = False
        leg.promoted = False
        cfgc = self.config
        t_lead = self.gait.swing_duration()
        twist3 = np.array([twist_world[0], twist_world[1], wz])
        hip_now = state.kin.o[0][g]
        hip_pred = hip_now + t_lead * np.array([twist_world[0], twist_world[1], 0.0])
        capture = self.capture if (self.push_active and
                                   cfgc.reactive.push_recovery_enabled) else None
        fh = footstep.plan_foothold(
            g, hip_pred, state.cfg.base_pos, twist3, self.gait, state.plane,
            r_max=cfgc.swing.reach_max, capture_offset=capture)
        try:
            leg.trajectory = footstep.generate_swing(
                state.feet[g], fh, cfgc.swing.height,
                max(t_lead, 1e-3), state.plane)
        except ValueError:
            leg.trajectory = None
        events.append(f"liftoff:{LEG_NAMES[g]}")

    def _build_references(self, state, cs, twist_world, twist_body, dt):
        cfgc = self.config
        refs = References()
        # CoM: integrate the command, pull gently toward the polygon center
        self.com_ref_xy = self.com_ref_xy + twist_world * dt
        pull = cfgc.runtime.com_anchor_rate * dt
        self.com_ref_xy = self.com_ref_xy + pull * (state.polygon_center
                                                    - self.com_ref_xy)
        err = self.com_ref_xy - state.com[:2]
        nrm = float(np.hypot(err[0], err[1]))
        if nrm > 0.10:   # reference governor
            self.com_ref_xy = state.com[:2] + err * (0.10 / nrm)
        z_ref = state.plane.height_at(*self.com_ref_xy) + self.com_height_nominal
        refs.com_pos = np.array([self.com_ref_xy[0], self.com_ref_xy[1], z_ref])
        refs.com_vel = np.array([twist_world[0], twist_world[1], 0.0])
        refs.com_acc = np.zeros(3)

        # base orientation: terrain-aligned roll/pitch, integrated yaw
        self.yaw_ref += twist_body[2] * dt
        yaw_est = yaw_of(state.horizontal_quat)
        dyaw = (self.yaw_ref - yaw_est + math.pi) % (2 * math.pi) - math.pi
        if abs(dyaw) > 0.4:
            self.yaw_ref = yaw_est + math.copysign(0.4, dyaw)
        R_ref = state.plane.rotation() @ rot_z(self.yaw_ref)
        refs.base_quat = rot_to_quat(R_ref)
        refs.base_ang_vel = np.array([0.0, 0.0, twist_body[2]])

        # feet: swing tracking, or probing when a stance leg lost contact
        sched_stance = cs.stance
        for g in range(4):
            leg = self.legs[g]
            if not sched_stance[g] and leg.trajectory is not None and not leg.promoted:
                s = self._traj_phase(leg)
                pos, vel, acc, _ = leg.trajectory.sample(s)
                refs.swing[g] = (pos, vel, acc)
            elif sched_stance[g] and not state.contacts[g]:
                # touchdown seeking: descend along the plane normal
                if leg.probe_anchor is None:
                    leg.probe_anchor = state.feet[g].copy()
                    leg.probe_depth = 0.0
                leg.probe_depth += 0.25 * dt
                n = state.plane.normal
                pos = leg.probe_anchor - leg.probe_depth * n
                refs.swing[g] = (pos, -0.25 * n, np.zeros(3))
            elif sched_stance[g] and state.contacts[g] and leg.probe_anchor is not None:
                leg.probe_anchor = None
                leg.probe_depth = 0.0

        refs.posture_q = self.model.default_joints
        # arm
        if self.model.has_arm:
            refs.footprint = self._footprint(state)
            if self.arm_waypoint is not None:
                p0, q0, p1, q1, T, t0 = self.arm_waypoint
                tt = self.time - t0
                pos, quat, vel, ang = min_jerk_waypoint(p0, q0, p1, q1, T, tt)
                refs.arm_target = (pos, quat)
                refs.arm_vel = np.concatenate([vel, ang])
                if tt >= T:
                    self.arm_hold = (p1, q1)
                    self.arm_waypoint = None
            elif self.arm_hold is not None:
                refs.arm_target = self.arm_hold
                refs.arm_vel = np.zeros(6)
        return refs

    def _footprint(self, state):
        yaw = yaw_of(state.horizontal_quat)
        x, y = state.cfg.base_pos[0], state.cfg.base_pos[1]
        return (np.array([x, y, state.plane.height_at(x, y)]), yaw)


# ---------------------------------------------------------------------------
# scenarios

@dataclass
class Scenario:
    duration: float
    terrain: str = "flat"
    seed: int = 0
    events: list = field(default_factory=list)
    noise: dict = field(default_factory=dict)
    with_arm: bool = False

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("scenario duration must be positive")
        self.events = sorted(self.events, key=lambda e: float(e["t"]))

    @classmethod
    def from_json(cls, source):
        if isinstance(source, (str, bytes)) and str(source).lstrip().startswith("{"):
            data = json.loads(source)
        elif isinstance(source, dict):
            data = source
        else:
            with open(source) as fh:
                data = json.load(fh)
        return cls(duration=float(data["duration"]),
                   terrain=data.get("terrain", "flat"),
                   seed=int(data.get("seed", 0)),
                   events=data.get("events", []),
                   noise=data.get("noise", {}),
                   with_arm=bool(data.get("with_arm", False)))


@dataclass
class RunReport:
    fall: bool
    fall_time: float
    duration: float
    ticks: int
    mean_solve_ms: float
    p99_solve_ms: float
    velocity_error: dict
    events: list
    final_base: list
    distance: float


class Runtime:
    """Couples controller and simulator in lock-step at one dt."""

    def __init__(self, model, config=None, terrain=None, seed=0,
                 start_cfg=None):
        self.model = model
        self.config = config or WolfConfig()
        self.terrain = terrain if terrain is not None else Terrain()
        cfg0 = start_cfg if start_cfg is not None else equilibrium_start(
            model, self.terrain, self.config.sim)
        self.sim = Simulator(model, self.terrain, self.config.sim, cfg0, seed)
        self.controller = Controller(model, self.config, cfg0)
        self.sources = CommandSources(self.config.runtime.staleness_timeout,
                                      self.config.runtime.operator_latch)
        self.noise = NoiseConfig(**{})
        self.snapshot = None     # (state, diag, sim truth) for the bridge
        self.event_log = []

    def nominal_height(self):
        return self.model.stance_height

    def _fall_check(self):
        cfg = self.sim.cfg
        ground = float(self.terrain.height(np.array([cfg.base_pos[0]]),
                                           np.array([cfg.base_pos[1]]))[0])
        height = cfg.base_pos[2] - ground
        from .rotations import rpy_of
        roll, pitch, _ = rpy_of(cfg.base_quat)
        return (height < 0.6 * self.nominal_height()
                or abs(roll) > 0.5 or abs(pitch) > 0.5)

    def tick(self, dt):
        """One lock-step control + physics tick."""
        # push requests act on the simulator, not the controller
        remaining = []
        for kind, payload in self.sources.queue:
            if kind == "push":
                self.sim.apply_push(payload["force"],
                                    payload.get("point", (0, 0, 0)),
                                    payload.get("duration", 0.1))
                self.event_log.append((self.controller.time,
                                       [f"push_applied:{payload['force']}"]))
            else:
                remaining.append((kind, payload))
        self.sources.queue = remaining
        sensors = self.sim.sensors(self.noise)
        tau, state, diag = self.controller.control_step(sensors, self.sources, dt)
        self.sim.step(tau, dt)
        diag.fall = self._fall_check()
        self.snapshot = (state, diag, self.sim.cfg.copy(), tau)
        if diag.events:
            self.event_log.append((diag.time, list(diag.events)))
        return state, diag, tau

    def run_scenario(self, scenario, log_path=None, diag_path=None,
                     progress=None):
        dt = self.config.runtime.dt
        self.noise = NoiseConfig(**scenario.noise) if scenario.noise \
            else NoiseConfig()
        self.sim.rng = np.random.default_rng(scenario.seed)
        n_ticks = int(round(scenario.duration / dt))
        pending = list(scenario.events)
        solve_times = []
        fall = False
        fall_time = -1.0
        rows = []
        cmd_trace = []
        start_x = self.sim.cfg.base_pos.copy()

        for k in range(n_ticks):
            now = self.controller.time
            while pending and float(pending[0]["t"]) <= now + dt * 0.5:
                ev = pending.pop(0)
                self._dispatch(ev, now)
            state, diag, tau = self.tick(dt)
            solve_times.append(diag.solve_ms)
            cmd_trace.append((diag.active_twist.copy(),
                              self.sim.cfg.base_lin.copy(),
                              self.sim.cfg.base_ang[2],
                              yaw_of(self.sim.cfg.base_quat)))
            if not fall and diag.fall:
                fall = True
                fall_time = diag.time
            if log_path is not None:
                rows.append(self._csv_row(state, diag, tau))
            if progress and k % 1000 == 999:
                progress(k + 1, n_ticks)

        if log_path is not None:
            self._write_csv(log_path, rows)
        if diag_path is not None:
            with open(diag_path, "w") as fh:
                json.dump({"solve_ms": solve_times}, fh)
        report = RunReport(
            fall=fall, fall_time=fall_time, duration=scenario.duration,
            ticks=n_ticks,
            mean_solve_ms=float(np.mean(solve_times)),
            p99_solve_ms=float(np.percentile(solve_times, 99)),
            velocity_error=self._velocity_errors(cmd_trace, dt),
            events=self.event_log,
            final_base=self.sim.cfg.base_pos.tolist(),
            distance=float(np.linalg.norm(
                (self.sim.cfg.base_pos - start_x)[:2])),
        )
        return report

    def _dispatch(self, ev, now):
        kind = ev["kind"]
        if kind == "twist":
            self.sources.put_twist(ev.get("vx", 0.0), ev.get("vy", 0.0),
                                   ev.get("wz", 0.0), now,
                                   ev.get("source", "operator"))
        elif kind == "push":
            self.sim.apply_push(ev["force"], ev.get("point", (0, 0, 0)),
                                ev.get("duration", 0.1))
            self.event_log.append((now, [f"push_applied:{ev['force']}"]))
        else:
            self.sources.put(kind, ev)

    def _velocity_errors(self, trace, dt):
        """Mean achieved vs commanded velocity per axis, command frame."""
        out = {}
        arr_cmd = np.array([t[0] for t in trace])
        arr_vel = np.array([t[1] for t in trace])
        arr_wz = np.array([t[2] for t in trace])
        arr_yaw = np.array([t[3] for t in trace])
        # body-frame achieved planar velocity
        c, s = np.cos(arr_yaw), np.sin(arr_yaw)
        vx_body = c * arr_vel[:, 0] + s * arr_vel[:, 1]
        vy_body = -s * arr_vel[:, 0] + c * arr_vel[:, 1]
        achieved = np.stack([vx_body, vy_body, arr_wz], axis=1)
        for i, name in enumerate(("vx", "vy", "wz")):
            active = np.abs(arr_cmd[:, i]) > 1e-9
            if active.sum() < int(1.0 / dt):
                continue
            # skip the first second after command onset (transient)
            idx = np.flatnonzero(active)
            idx = idx[idx >= idx[0] + int(1.0 / dt)]
            if len(idx) == 0:
                continue
            cmd_mean = float(arr_cmd[idx, i].mean())
            ach_mean = float(achieved[idx, i].mean())
            out[name] = {"commanded": cmd_mean, "achieved": ach_mean,
                         "rel_error": abs(ach_mean - cmd_mean)
                         / max(abs(cmd_mean), 1e-9)}
        return out

    # -- telemetry ------------------------------------------------------------

    def _csv_header(self):
        nj = self.model.n_joints
        cols = ["time",
                "base_x", "base_y", "base_z",
                "base_qw", "base_qx", "base_qy", "base_qz",
                "base_vx", "base_vy", "base_vz",
                "base_wx", "base_wy", "base_wz"]
        cols += [f"q{i}" for i in range(nj)]
        cols += [f"qd{i}" for i in range(nj)]
        cols += [f"tau{i}" for i in range(nj)]
        cols += [f"contact_{leg}" for leg in LEG_NAMES]
        cols += ["com_x", "com_y", "com_z", "icp_x", "icp_y",
                 "polygon_vertices", "events"]
        return cols

    def _csv_row(self, state, diag, tau):
        sim_cfg = self.sim.cfg
        vals = [diag.time,
                *sim_cfg.base_pos, *sim_cfg.base_quat,
                *sim_cfg.base_lin, *sim_cfg.base_ang]
        vals += list(sim_cfg.q) + list(sim_cfg.qd) + list(tau)
        vals += [int(c) for c in state.contacts]
        vals += [*state.com, *state.icp, len(state.support_polygon)]
        events = ";".join(diag.events)
        return vals, events

    def _write_csv(self, path, rows):
        with open(path, "w") as fh:
            fh.write(",".join(self._csv_header()) + "\n")
            for vals, events in rows:
                fh.write(",".join("%.17g" % v for v in vals))
                fh.write(f",{events}\n")
