"""Classic-control benchmark environments with hard-coded dynamics.

The dynamics, constants and observation layouts follow the well-known
CartPole-v1, Acrobot-v1 and Pendulum-v1 definitions so results are
comparable, but nothing here depends on an external simulator.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


class Env:
    name: str
    obs_dim: int
    discrete: bool
    num_actions: int = 0
    action_dim: int = 0
    horizon: int

    def __init__(self):
        self.rng = np.random.default_rng()
        self.state = None
        self.step_count = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.step_count = 0
        self.state = self._initial_state()
        return self.observation()

    def step(self, action) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        reward, terminated = self._advance(self._check_action(action))
        self.step_count += 1
        truncated = (not terminated) and self.step_count >= self.horizon
        return StepResult(self.observation(), float(reward), terminated, truncated)

    def _check_action(self, action):
        if self.discrete:
            a = int(action)
            if a != action or not 0 <= a < self.num_actions:
                raise ValueError(f"{self.name}: action {action!r} not in {{0..{self.num_actions - 1}}}")
            return a
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] != self.action_dim or not np.all(np.isfinite(a)):
            raise ValueError(f"{self.name}: expected a finite action of length {self.action_dim}")
        return a

    def observation(self) -> np.ndarray:
        raise NotImplementedError

    def _initial_state(self):
        raise NotImplementedError

    def _advance(self, action) -> tuple[float, bool]:
        raise NotImplementedError


class CartPole(Env):
    name = "cartpole"
    obs_dim = 4
    discrete = True
    num_actions = 2
    horizon = 500

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    def _initial_state(self):
        return self.rng.uniform(-0.05, 0.05, size=4)

    def observation(self):
        return self.state.copy()

    def _advance(self, action):
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if action == 1 else -self.force_mag
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        costheta, sintheta = math.cos(theta), math.sin(theta)
        temp = (force + polemass_length * theta_dot**2 * sintheta) / total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta**2 / total_mass))
        xacc = temp - polemass_length * thetaacc * costheta / total_mass
        # explicit Euler
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self.state = np.array([x, x_dot, theta, theta_dot])
        terminated = bool(x < -self.x_threshold or x > self.x_threshold
                          or theta < -self.theta_threshold or theta > self.theta_threshold)
        return 1.0, terminated


def _wrap(x: float, lo: float, hi: float) -> float:
    diff = hi - lo
    while x > hi:
        x -= diff
    while x < lo:
        x += diff
    return x


class Acrobot(Env):
    name = "acrobot"
    obs_dim = 6
    discrete = True
    num_actions = 3
    horizon = 500

    dt = 0.2
    link_length_1 = 1.0
    link_mass_1 = 1.0
    link_mass_2 = 1.0
    link_com_1 = 0.5
    link_com_2 = 0.5
    link_moi = 1.0
    max_vel_1 = 4 * math.pi
    max_vel_2 = 9 * math.pi
    torques = (-1.0, 0.0, 1.0)
    g = 9.8

    def _initial_state(self):
        return self.rng.uniform(-0.1, 0.1, size=4)

    def observation(self):
        s = self.state
        return np.array([math.cos(s[0]), math.sin(s[0]), math.cos(s[1]), math.sin(s[1]), s[2], s[3]])

    def _derivs(self, s, torque):
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1 = self.link_length_1
        lc1, lc2 = self.link_com_1, self.link_com_2
        i1 = i2 = self.link_moi
        g = self.g
        theta1, theta2, dtheta1, dtheta2 = s
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
        phi2 = m2 * lc2 * g * math.cos(theta1 + theta2 - math.pi / 2.0)
        phi1 = (-m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
                - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
                + (m1 * lc1 + m2 * l1) * g * math.cos(theta1 - math.pi / 2) + phi2)
        ddtheta2 = ((torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2)
                    / (m2 * lc2**2 + i2 - d2**2 / d1))
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2])

    def _advance(self, action):
        torque = self.torques[action]
        s = self.state
        h = self.dt
        k1 = self._derivs(s, torque)
        k2 = self._derivs(s + 0.5 * h * k1, torque)
        k3 = self._derivs(s + 0.5 * h * k2, torque)
        k4 = self._derivs(s + h * k3, torque)
        ns = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ns[0] = _wrap(ns[0], -math.pi, math.pi)
        ns[1] = _wrap(ns[1], -math.pi, math.pi)
        ns[2] = min(max(ns[2], -self.max_vel_1), self.max_vel_1)
        ns[3] = min(max(ns[3], -self.max_vel_2), self.max_vel_2)
        self.state = ns
        terminated = self.tip_height() >= 1.0
        return (0.0 if terminated else -1.0), terminated

    def tip_height(self) -> float:
        s = self.state
        return -math.cos(s[0]) - math.cos(s[1] + s[0])


def angle_normalize(x: float) -> float:
    return ((x + math.pi) % (2 * math.pi)) - math.pi


class PendulumSwingup(Env):
    name = "pendulum"
    obs_dim = 3
    discrete = False
    action_dim = 1
    horizon = 200

    max_speed = 8.0
    max_torque = 2.0
    g = 10.0
    m = 1.0
    l = 1.0  # noqa: E741

    def __init__(self, dt: float = 0.05, horizon: int = 200, clip_speed: bool = True):
        super().__init__()
        self.dt = dt
        self.horizon = horizon
        self.clip_speed = clip_speed

    def _initial_state(self):
        return np.array([self.rng.uniform(-math.pi, math.pi), self.rng.uniform(-1.0, 1.0)])

    def observation(self):
        th, thdot = self.state
        return np.array([math.cos(th), math.sin(th), thdot])

    def energy(self) -> float:
        """Mechanical energy of the uniform rod about its pivot (zero-torque invariant)."""
        th, thdot = self.state
        return self.m * self.l**2 * thdot**2 / 6.0 + self.m * self.g * self.l * math.cos(th) / 2.0

    def _advance(self, action):
        th, thdot = self.state
        u = min(max(float(action[0]), -self.max_torque), self.max_torque)
        cost = angle_normalize(th) ** 2 + 0.1 * thdot**2 + 0.001 * u**2
        # semi-implicit Euler
        thdot = thdot + (3 * self.g / (2 * self.l) * math.sin(th) + 3.0 / (self.m * self.l**2) * u) * self.dt
        if self.clip_speed:
            thdot = min(max(thdot, -self.max_speed), self.max_speed)
        th = th + thdot * self.dt
        self.state = np.array([th, thdot])
        return -cost, False


ENVIRONMENTS = {"cartpole": CartPole, "acrobot": Acrobot, "pendulum": PendulumSwingup}


def make(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
