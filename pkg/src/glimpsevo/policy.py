"""Reinforcement-learning subsystem: Gaussian locator, baseline value network,
terminal reward, the REINFORCE estimator, and the clipped-surrogate (PPO)
refinement over a replay memory.

Episodes are one frame pair: T locations, a single terminal reward
R = 1 / (1 + L), undiscounted returns (G_t = R for every step).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import Linear, ParameterSet
from .tensor import Tensor

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
SIGMA_MIN = 1e-3
# cap exploration noise at roughly a glimpse radius in normalized [-1, 1]
# coordinates: an unbounded sigma lets the locator drift to a degenerate
# max-entropy policy whenever the placement reward signal momentarily fades
SIGMA_MAX = 0.6


def reward(loss_value):
    """Terminal reward from the supervised loss: R = 1 / (1 + L)."""
    if loss_value < 0:
        raise ValueError(f"loss must be nonnegative, got {loss_value}")
    return 1.0 / (1.0 + float(loss_value))


def gaussian_log_prob(x, mu, sigma):
    """Log-density of x under N(mu, diag(sigma^2)); summed over the last axis.

    x is data (the sampled action); mu and sigma may carry gradients.
    """
    x = Tensor(np.asarray(x, dtype=mu.dtype))
    z = (x - mu) / sigma
    per_dim = T.square(z) * -0.5 - T.log(sigma) - 0.5 * LOG_2PI
    return per_dim.sum(axis=-1)


def reinforce_loss(log_probs, advantages, n_episodes):
    """Negated REINFORCE surrogate: -(1/M) sum_t log pi(l_t|h_t) * A_t."""
    adv = Tensor(np.asarray(advantages, dtype=log_probs.dtype))
    return (log_probs * adv).sum() * (-1.0 / n_episodes)


def ppo_objective(ratio, advantage, clip_eps):
    """Per-sample clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A)."""
    if isinstance(ratio, Tensor):
        adv = Tensor(np.asarray(advantage, dtype=ratio.dtype))
        return T.minimum(ratio * adv, T.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv)
    r, a = float(ratio), float(advantage)
    return min(r * a, float(np.clip(r, 1.0 - clip_eps, 1.0 + clip_eps)) * a)


class LocatorNet:
    """Maps the (detached) core state to a Gaussian over the next location.

    Mean goes through tanh into (-1, 1); the standard deviation is a learned
    softplus head clamped to [SIGMA_MIN, SIGMA_MAX].
    """

    def __init__(self, params: ParameterSet, prefix, width, rng, init_sigma=0.5):
        self.fc_mu = Linear(params, f"{prefix}.mu", width, 2, rng)
        self.fc_sigma = Linear(params, f"{prefix}.sigma", width, 2, rng)
        # bias such that softplus(bias) == init_sigma at zero input
        self.fc_sigma.b.data[:] = np.log(np.expm1(init_sigma))

    def __call__(self, h):
        mu = T.tanh(self.fc_mu(h))
        raw = T.softplus(self.fc_sigma(h))
        if np.any(raw.data < SIGMA_MIN):
            log.debug("locator sigma underflow, clamping to %g", SIGMA_MIN)
        sigma = T.clamp(raw, SIGMA_MIN, SIGMA_MAX)
        return mu, sigma


class BaselinerNet:
    """State-value head: fully connected 256 -> 32 -> scalar."""

    def __init__(self, params: ParameterSet, prefix, width, rng, hidden=(256, 32)):
        self.layers = []
        d = width
        for i, hdim in enumerate(hidden):
            self.layers.append(Linear(params, f"{prefix}.fc{i}", d, hdim, rng))
            d = hdim
        self.out = Linear(params, f"{prefix}.out", d, 1, rng)

    def __call__(self, h):
        x = h
        for lin in self.layers:
            x = T.relu(lin(x))
        return self.out(x)[:, 0]


def sample_location(h, locator, rng):
    """Sample next locations.  h is None for the first (uniform) step.

    Returns (locations (B,2) clamped, log_probs (B,), policy_sampled flag).
    Log-probs are of the pre-clamp sample and carry no gradient.
    """
    if h is None:
        raise ValueError("uniform first step has no state; use uniform_location")
    mu, sigma = locator(Tensor(h.data if isinstance(h, Tensor) else h).detach())
    raw = mu.data + sigma.data * rng.standard_normal(mu.data.shape).astype(mu.data.dtype)
    z = (raw - mu.data) / sigma.data
    logp = (-0.5 * z * z - np.log(sigma.data) - 0.5 * LOG_2PI).sum(axis=-1)
    return np.clip(raw, -1.0, 1.0), logp.astype(np.float64), True


def uniform_location(batch, rng):
    """First-step locations: uniform over [-1, 1]^2."""
    loc = rng.uniform(-1.0, 1.0, size=(batch, 2))
    logp = np.full(batch, np.log(0.25))  # density of U([-1,1]^2)
    return loc, logp, False


@dataclass
class RolloutBuffer:
    """One episode: T steps, terminal-only reward."""

    episode_id: int
    states: np.ndarray      # (T, width) detached h_1..h_T
    locations: np.ndarray   # (T, 2) l_1..l_T (l_1 was uniform)
    log_probs: np.ndarray   # (T,) behavior log-densities (entry 0: uniform step)
    baselines: np.ndarray   # (T,) b_t at collection time
    reward: float

    @property
    def horizon(self):
        return len(self.locations)

    def policy_entries(self):
        """(state, action, old_logp, baseline) per policy-sampled action.

        Action l_{t+1} was drawn from the policy at state h_t; its advantage
        uses b_t.  The uniform first location contributes no entry.
        """
        return (self.states[:-1], self.locations[1:], self.log_probs[1:], self.baselines[:-1])


class ReplayMemory:
    """Fixed-capacity ring buffer of episodes."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._items = []
        self._next = 0
        self.inserted = 0

    def add(self, episode):
        if len(self._items) < self.capacity:
            self._items.append(episode)
        else:
            self._items[self._next] = episode
            self._next = (self._next + 1) % self.capacity
        self.inserted += 1

    def __len__(self):
        return len(self._items)

    def sample(self, k, rng):
        k = min(k, len(self._items))
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in idx]


def _flatten(episodes):
    states, actions, old_logps, advs, all_states, returns = [], [], [], [], [], []
    for ep in episodes:
        s, a, lp, b = ep.policy_entries()
        states.append(s)
        actions.append(a)
        old_logps.append(lp)
        advs.append(ep.reward - b)
        all_states.append(ep.states)
        returns.append(np.full(len(ep.states), ep.reward))
    return (np.concatenate(states), np.concatenate(actions), np.concatenate(old_logps),
            np.concatenate(advs), np.concatenate(all_states), np.concatenate(returns))


def _baseline_loss(baseliner, states, returns):
    b = baseliner(Tensor(states.astype(np.float32)))
    err = b - Tensor(returns.astype(np.float32))
    return T.square(err).mean()


def reinforce_update(episodes, locator, baseliner, optimizer):
    """One REINFORCE ascent step on the locator plus baseline regression."""
    if not episodes:
        return {}
    # T == 1 episodes contribute no policy-sampled actions but still fit the baseline
    states, actions, _, advs, all_states, returns = _flatten(episodes)
    optimizer.zero_grad()
    loss_b = _baseline_loss(baseliner, all_states, returns)
    if len(states):
        mu, sigma = locator(Tensor(states.astype(np.float32)))
        logp = gaussian_log_prob(actions, mu, sigma)
        loss = reinforce_loss(logp, advs, len(episodes)) + loss_b
    else:
        loss = loss_b
    loss.backward()
    optimizer.step()
    return {
        "mean_reward": float(np.mean([ep.reward for ep in episodes])),
        "mean_sigma": float(sigma.data.mean()) if len(states) else 0.0,
        "adv_variance": float(np.var(advs)) if len(advs) else 0.0,
    }


def ppo_update(memory, locator, baseliner, optimizer, clip_eps=0.2,
               n_steps=20, minibatch=256, rng=None, ratio_cap=20.0):
    """Clipped-surrogate refinement: n_steps gradient steps on replay samples."""
    if len(memory) == 0:
        return {}
    rng = rng or np.random.default_rng(0)
    stats = {"mean_reward": 0.0, "mean_sigma": 0.0, "adv_variance": 0.0}
    for _ in range(n_steps):
        episodes = memory.sample(minibatch, rng)
        episodes = [ep for ep in episodes if ep.horizon >= 2]
        if not episodes:
            continue
        states, actions, old_logps, advs, all_states, returns = _flatten(episodes)
        optimizer.zero_grad()
        mu, sigma = locator(Tensor(states.astype(np.float32)))
        logp = gaussian_log_prob(actions, mu, sigma)
        delta = logp.data.astype(np.float64) - old_logps
        keep = np.abs(delta) <= ratio_cap
        if not keep.all():
            log.debug("ppo: skipping %d samples with ratio overflow", int((~keep).sum()))
        ratio = T.exp(logp - Tensor(old_logps.astype(logp.dtype)))
        obj = ppo_objective(ratio, advs, clip_eps)
        mask = keep.astype(obj.dtype)
        loss = (obj * Tensor(mask)).sum() * (-1.0 / max(mask.sum(), 1.0))
        loss = loss + _baseline_loss(baseliner, all_states, returns)
        loss.backward()
        optimizer.step()
        stats = {
            "mean_reward": float(np.mean([ep.reward for ep in episodes])),
            "mean_sigma": float(sigma.data.mean()),
            "adv_variance": float(np.var(advs)),
        }
    return stats
