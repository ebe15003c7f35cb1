"""Whole-body velocity controller: compiles motion goals and solves one QP per tick"""

from typing import Callable, List, Optional, Set, Tuple

import numpy as np

from ..models.domain import QPInfeasible
from ..utils.logger import logger
from ..worldmodel.world import Body, WorldState
from .goals import (
    CollisionRows,
    JointLimits,
    JointPositionGoal,
    TaskFunction,
    TickContext,
    cartesian_pose,
    follow_articulation,
    joint_centering,
    keep_vertical,
    look_at
)
from .problem import (
    PAIR_WIDTH,
    ControlConfig,
    ControlProblem,
    KinematicModel,
    MotionGoalSpec,
    MotionResult,
    ObservableLayout,
    PairSet,
    Trajectory
)
from .qp import ActiveSetQP

# Reach of the arms beyond the torso, used to prune obstacles at compile time
ARM_REACH = 1.3


class MotionPlanner:
    """Turns MotionGoalSpecs into control problems and integrates them.

    Args:
        config: Controller gains, weights and thresholds
        solver: QP solver used every tick
    """

    def __init__(self, config: Optional[ControlConfig] = None, solver: Optional[ActiveSetQP] = None):
        self.config = config or ControlConfig()
        self.solver = solver or ActiveSetQP()
        logger.debug(f"MotionPlanner initialized (dt={self.config.dt}, max_ticks={self.config.max_ticks})")

    # ------------------------------------------------------------------
    # Compilation
    # ------------------------------------------------------------------

    def controlled_dofs(self, spec: MotionGoalSpec, world: WorldState) -> List[str]:
        robot = world.robot
        arms = self._active_arms(spec, world)
        arm_dofs = [d for a in arms for d in robot.arms[a].dofs]
        if spec.type == "moving-base":
            dofs = list(robot.base_dofs)
        elif spec.type == "looking":
            dofs = list(robot.head_dofs)
        elif spec.type == "moving-arm":
            dofs = list(robot.torso_dofs) + arm_dofs + list(robot.head_dofs)
        else:
            container = world.container(spec.container)
            env_dofs = world.environment.tree.joints[container.joint].dof_names
            dofs = list(robot.base_dofs) + list(robot.torso_dofs) + arm_dofs + list(robot.head_dofs) + list(env_dofs)
        for name in spec.joint_goals:
            if name not in dofs:
                dofs.append(name)
        return dofs

    def _active_arms(self, spec: MotionGoalSpec, world: WorldState) -> List[str]:
        arms = world.robot.arms
        if spec.arm is not None:
            if spec.arm not in arms:
                raise ValueError(f"Unknown arm {spec.arm}")
            return [spec.arm]
        named = [a for a, info in arms.items() if info.tool_frame in spec.goal_poses]
        named += [a for a, info in arms.items() if a not in named and set(info.dofs) & set(spec.joint_goals)]
        return named or sorted(arms)

    def _goal_weight(self, spec: MotionGoalSpec) -> float:
        cfg = self.config
        interaction = spec.interaction or spec.type in ("opening", "closing")
        if spec.type == "moving-arm" and spec.collision_mode != "avoid-all":
            interaction = True
        return cfg.weight_interaction if interaction else cfg.weight_base

    def _goal_tasks(self, spec: MotionGoalSpec, world: WorldState) -> List[TaskFunction]:
        cfg = self.config
        weight = self._goal_weight(spec)
        robot = world.robot
        arms = self._active_arms(spec, world)
        tasks: List[TaskFunction] = []
        if spec.type in ("opening", "closing"):
            container = world.container(spec.container)
            if spec.target_position is not None:
                target = float(spec.target_position)
            elif spec.type == "opening":
                target = container.open_position
            else:
                target = container.closed_position
            tasks += follow_articulation(world, spec.container, robot.arms[arms[0]].tool_frame, target, cfg)
        for frame, pose in spec.goal_poses.items():
            if not robot.tree.has_link(frame):
                raise ValueError(f"Goal frame {frame} is not a robot link")
            tasks += cartesian_pose(frame, pose.matrix(), weight, spec.rotation_tolerance)
        if spec.joint_goals:
            tasks.append(JointPositionGoal(dict(spec.joint_goals), weight))
        if spec.type == "looking":
            tasks += look_at(robot.camera_frame, spec.look_target, cfg.weight_base, goal=True)
        if "keep-vertical-orientation" in spec.constraints:
            for arm in arms:
                tasks += keep_vertical(world, robot.arms[arm].tool_frame, cfg.keep_vertical_tolerance)
        if "look-at-hand" in spec.constraints and spec.type != "looking":
            tasks += look_at(robot.camera_frame, np.zeros(3), cfg.weight_base, link=robot.arms[arms[0]].tool_frame)
        return tasks

    def _allowed_obstacle(self, spec: MotionGoalSpec, world: WorldState) -> Callable[[Body], bool]:
        """Predicate selecting the obstacles the collision mode lets the robot touch"""
        if spec.collision_mode == "avoid-all":
            return lambda body: False
        target = spec.collision_object
        part = spec.collision_object_part
        env = world.environment
        if target is None:
            return lambda body: True
        if part is not None:
            if not env.tree.has_link(part) and part not in world.objects:
                raise ValueError(f"Unknown collision object part {part} of {target}")
            return lambda body: body.link == part or body.object_id == part
        if target in world.objects:
            return lambda body: body.object_id == target
        if target == env.name:
            return lambda body: body.owner == "environment"
        links: Set[str] = set()
        if target in env.containers:
            links.update(env.tree.subtree_links(env.containers[target].handle_link))
        elif target in env.locations:
            links.update(env.tree.subtree_links(env.locations[target].link))
        elif env.tree.has_link(target):
            links.update(env.tree.subtree_links(target))
        else:
            raise ValueError(f"Unknown collision object {target}")
        return lambda body: body.owner == "environment" and body.link in links

    def _excused_robot_links(self, spec: MotionGoalSpec, world: WorldState) -> Tuple[Set[str], bool]:
        """Robot links (and whether held objects) the collision mode excuses"""
        mode = spec.collision_mode
        if mode == "avoid-all":
            return set(), False
        if mode == "allow-all":
            return set(world.robot.tree.links), True
        links: Set[str] = set()
        for arm in self._active_arms(spec, world):
            info = world.robot.arms[arm]
            links.update(info.finger_links)
            if mode in ("allow-hand", "allow-arm"):
                links.update(info.hand_links)
            if mode == "allow-arm":
                links.update(info.arm_links)
        held = mode in ("allow-fingers-and-object", "allow-hand", "allow-arm")
        return links, held

    def _collision_pairs(self, spec: MotionGoalSpec, world: WorldState) -> PairSet:
        cfg = self.config
        robot_bodies = world.robot_bodies(include_attached=True)
        obstacles = list(world.environment_bodies()) + list(world.object_bodies())
        allowed = self._allowed_obstacle(spec, world)
        excused_links, excused_held = self._excused_robot_links(spec, world)

        base = np.array(world.base_pose()[:2])
        if spec.type == "moving-base" and world.robot.base_link in spec.goal_poses:
            goal = spec.goal_poses[world.robot.base_link].translation[:2]
        else:
            goal = base
        reach = ARM_REACH + cfg.broadphase_radius

        def near_path(body: Body) -> bool:
            center = body.transform[:3, 3][:2]
            seg = goal - base
            t = float(np.clip(np.dot(center - base, seg) / max(np.dot(seg, seg), 1e-12), 0.0, 1.0))
            return np.linalg.norm(center - (base + t * seg)) - body.shape.bounding_radius() <= reach

        kept = [b for b in obstacles if near_path(b)]
        pairs = []
        for i, rb in enumerate(robot_bodies):
            held = rb.object_id is not None
            for j, ob in enumerate(kept):
                if held and ob.object_id == rb.object_id:
                    continue
                excused = (held and excused_held) or (not held and rb.link in excused_links)
                if excused and allowed(ob):
                    continue
                pairs.append((i, j))
        return PairSet(robot_bodies, kept, pairs)

    def compile(self, spec: MotionGoalSpec, world: WorldState) -> ControlProblem:
        """Compile a motion goal against the current world into a control problem.

        Raises:
            ValueError: for unknown frames, DOFs, arms or out-of-range targets
        """
        cfg = self.config
        controlled = self.controlled_dofs(spec, world)
        model = KinematicModel(world, controlled)
        tasks = self._goal_tasks(spec, world)
        if "joint-centering" in spec.constraints:
            centered = [d for d in controlled if d in world.robot.tree.dof_names and d not in world.robot.base_dofs]
            tasks += joint_centering(world, centered, cfg.weight_base * cfg.centering_weight_scale)

        pairs = self._collision_pairs(spec, world)
        if len(pairs):
            tasks.append(CollisionRows(pairs, hard=True))
            tasks.append(CollisionRows(pairs, hard=False, weight=cfg.weight_collision))

        layout = ObservableLayout()
        layout.add("joints", len(model.dof_names))
        for task in tasks:
            task.declare(layout)
        layout.add("pairs", PAIR_WIDTH * len(pairs))
        initial = np.zeros(layout.size)
        for task in tasks:
            values = task.initial_values()
            if values is not None:
                initial[layout[f"goal:{task.name}"]] = values

        lower = np.empty(model.n_vars)
        upper = np.empty(model.n_vars)
        velocity = np.empty(model.n_vars)
        for k, name in enumerate(controlled):
            tree = world.robot.tree if name in world.robot.tree.dof_names else world.environment.tree
            i = tree.dof_index(name)
            lower[k], upper[k], velocity[k] = tree.lower[i], tree.upper[i], tree.velocity_limits[i]

        problem = ControlProblem(
            spec=spec,
            model=model,
            layout=layout,
            tasks=tasks,
            pairs=pairs,
            lower_position=lower,
            upper_position=upper,
            velocity_limits=velocity,
            config=cfg,
            initial_observables=initial,
        )
        logger.debug(
            f"Compiled {spec.type}: {model.n_vars} DOFs, {len(tasks)} task functions, "
            f"{len(pairs)} collision pairs, {layout.size} observables"
        )
        return problem

    # ------------------------------------------------------------------
    # Control
    # ------------------------------------------------------------------

    def solve_tick(self, problem: ControlProblem, observables: np.ndarray, frames=None) -> np.ndarray:
        """Velocities of the controlled DOFs for one tick.

        Raises:
            QPInfeasible: when the hard rows cannot be satisfied
        """
        cfg = problem.config
        model = problem.model
        if frames is None:
            frames = model.frames(observables[problem.layout["joints"]])
        ctx = TickContext(observables, frames, problem.layout, model, cfg)
        n = model.n_vars
        lb, ub = JointLimits().bounds(ctx, problem.lower_position, problem.upper_position, problem.velocity_limits)

        soft_j, soft_lo, soft_hi, soft_w = [], [], [], []
        hard_j, hard_lo, hard_hi = [], [], []
        for task in problem.tasks:
            rows = task.rows(ctx)
            if not len(rows.lower):
                continue
            if task.hard:
                hard_j.append(rows.jacobian)
                hard_lo.append(rows.lower)
                hard_hi.append(rows.upper)
            else:
                soft_j.append(rows.jacobian)
                soft_lo.append(rows.lower)
                soft_hi.append(rows.upper)
                soft_w.append(np.full(len(rows.lower), task.weight))

        js = np.vstack(soft_j) if soft_j else np.zeros((0, n))
        slo = np.concatenate(soft_lo) if soft_lo else np.zeros(0)
        shi = np.concatenate(soft_hi) if soft_hi else np.zeros(0)
        w = np.concatenate(soft_w) if soft_w else np.zeros(0)
        jh = np.vstack(hard_j) if hard_j else np.zeros((0, n))
        hlo = np.concatenate(hard_lo) if hard_lo else np.zeros(0)
        hhi = np.concatenate(hard_hi) if hard_hi else np.zeros(0)
        m = len(slo)
        size = n + m

        H = 2.0 * np.diag(np.concatenate([np.full(n, cfg.epsilon), w]))
        c = np.zeros(size)
        blocks = [
            (np.hstack([js, np.eye(m)]), slo, shi),
            (np.hstack([jh, np.zeros((len(hlo), m))]), hlo, hhi),
            (np.eye(n, size), lb, ub),
        ]
        ineq_a, ineq_b, eq_a, eq_b = [], [], [], []
        for coeffs, lo, hi in blocks:
            # rows with coinciding finite bounds become equalities
            equal = np.isfinite(lo) & np.isfinite(hi) & (np.abs(hi - lo) <= 1e-12)
            upper = np.isfinite(hi) & ~equal
            lower = np.isfinite(lo) & ~equal
            eq_a.append(coeffs[equal])
            eq_b.append(lo[equal])
            ineq_a += [coeffs[upper], -coeffs[lower]]
            ineq_b += [hi[upper], -lo[lower]]
        A = np.vstack(ineq_a)
        b = np.concatenate(ineq_b)
        E = np.vstack(eq_a)
        e = np.concatenate(eq_b)
        if not len(e):
            E = e = None

        qdot0 = np.clip(np.zeros(n), lb, ub)
        x0 = np.zeros(size)
        x0[:n] = qdot0
        residual = js @ qdot0 if m else np.zeros(0)
        lo, hi = slo - residual, shi - residual
        pinned = np.isfinite(lo) & np.isfinite(hi) & (np.abs(hi - lo) <= 1e-12)
        x0[n:] = np.where(pinned, lo, np.clip(np.zeros(m), lo, hi))
        hard_ok = True
        if len(hlo):
            h_val = jh @ qdot0
            hard_ok = bool(np.all(h_val >= hlo - 1e-9) and np.all(h_val <= hhi + 1e-9))
        if hard_ok:
            solution = self.solver.solve(H, c, A, b, x0, E, e)
        else:
            solution = self.solver.solve_from_infeasible(H, c, A, b, E, e)
        return solution.x[:n]

    def step(self, problem: ControlProblem, q_all: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        """Integrate one tick, clamped to the joint limits"""
        q_next = q_all.copy()
        idx = problem.model.controlled_positions
        q_next[idx] = np.clip(q_all[idx] + qdot * problem.config.dt, problem.lower_position, problem.upper_position)
        return q_next

    def converged(self, problem: ControlProblem, ctx: TickContext) -> bool:
        goals = [t for t in problem.tasks if t.converges]
        return bool(goals) and all(t.converged(ctx) for t in goals)

    def goal_error(self, problem: ControlProblem, ctx: TickContext) -> float:
        return float(sum(t.error(ctx) for t in problem.tasks if t.converges))

    def execute(self, problem: ControlProblem, world: WorldState, max_ticks: Optional[int] = None) -> MotionResult:
        """Run the control loop until convergence, stall or the tick budget.

        Returns:
            MotionResult with the trajectory of the controlled DOFs and the final world
        """
        cfg = problem.config
        model = problem.model
        budget = max_ticks or cfg.max_ticks
        q = np.array([world.positions[name] for name in model.dof_names])
        samples = [q[model.controlled_positions].copy()]
        best_error = np.inf
        since_best = 0
        min_distance = np.inf
        converged = False
        reason = "tick budget exhausted"
        ticks = 0
        for ticks in range(budget):
            o, frames = problem.observe(q)
            if len(problem.pairs):
                distances = o[problem.layout["pairs"]][6::PAIR_WIDTH]
                min_distance = min(min_distance, float(np.min(distances)))
            ctx = TickContext(o, frames, problem.layout, model, cfg)
            if self.converged(problem, ctx):
                converged = True
                reason = "converged"
                break
            error = self.goal_error(problem, ctx)
            if error < best_error - 1e-5:
                best_error = error
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.stall_ticks:
                    reason = f"stalled at goal error {error:.4f}"
                    break
            try:
                qdot = self.solve_tick(problem, o, frames)
            except QPInfeasible as exc:
                reason = f"infeasible: {exc}"
                break
            q = self.step(problem, q, qdot)
            samples.append(q[model.controlled_positions].copy())
        else:
            ticks = budget
        positions = np.array(samples)
        times = world.sim_time + cfg.dt * np.arange(len(positions))
        trajectory = Trajectory(list(model.controlled), times, positions)
        final_world = world.with_positions(trajectory.final()).with_time(float(times[-1]))
        if not converged:
            logger.debug(f"{problem.spec.type} motion did not converge: {reason}")
        return MotionResult(trajectory, converged, final_world, ticks, min_distance, reason)

    def plan(self, spec: MotionGoalSpec, world: WorldState, max_ticks: Optional[int] = None) -> MotionResult:
        """Compile and execute in one call"""
        return self.execute(self.compile(spec, world), world, max_ticks)
