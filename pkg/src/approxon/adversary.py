"""Adversary strategies and the exhaustive bounded-schedule explorer.

Strategies plug into the kernel: they assign per-envelope delays, corrupt up
to t parties (optionally mid-multicast) and drive byzantine traffic.  The
explorer enumerates every delivery interleaving realizable with delays from a
small set, together with byzantine messages drawn from a declared menu, and
returns the full reachable outcome set; it is the safety oracle for the
protocol test suites.
"""

from __future__ import annotations

import copy
import hashlib
import pickle
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .automaton import Halt, Multicast, Output, Signal
from .errors import BoundExceeded, InvalidConfig
from .kernel import Adversary, KernelContext, SimConfig, SimResult, run_simulation


def _flip_one_bit(payload: bytes, rng: random.Random) -> bytes:
    if not payload:
        return payload
    index = rng.randrange(len(payload) * 8)
    flipped = bytearray(payload)
    flipped[index // 8] ^= 1 << (index % 8)
    return bytes(flipped)


class RandomAdversary(Adversary):
    """I.i.d. delays from a finite set; corrupted parties equivocate uniformly
    over observed honest payloads plus one fresh (bit-flipped) value."""

    name = "random"

    def __init__(self, seed: Optional[int] = None, delay_set=(1, 2), *,
                 corrupt_count: Optional[int] = None, equivocate: bool = True,
                 mirror_prob: float = 0.75, mirror_cap: int = 2,
                 intercept_prob: float = 0.0):
        if not delay_set or any(d <= 0 for d in delay_set):
            raise InvalidConfig("delay set must be finite and positive")
        self.seed = seed
        self.delay_set = tuple(delay_set)
        self.corrupt_count = corrupt_count
        self.equivocate = equivocate
        self.mirror_prob = mirror_prob
        self.mirror_cap = mirror_cap
        self.intercept_prob = intercept_prob

    def begin(self, ctx: KernelContext) -> None:
        seed = self.seed if self.seed is not None else ctx.rng.getrandbits(64)
        self.rng = random.Random(seed)
        count = self.corrupt_count if self.corrupt_count is not None else ctx.t
        for party in sorted(self.rng.sample(range(ctx.n), count)):
            ctx.corrupt(party)
        self._menu: dict[tuple, list[bytes]] = {}
        self._fresh: dict[tuple, bytes] = {}
        self._mirrored: dict[tuple, int] = {}
        self._queue: list[tuple] = []

    def delay(self, ctx, sender, receiver, tag, kind, payload):
        return self.rng.choice(self.delay_set)

    def on_multicast(self, ctx, sender, tag, kind, payload):
        key = (tag, kind)
        menu = self._menu.setdefault(key, [])
        if payload not in menu:
            menu.append(payload)
        if key not in self._fresh:
            self._fresh[key] = _flip_one_bit(payload, self.rng)
        if self.equivocate and ctx.corrupted:
            count = self._mirrored.get(key, 0)
            if count < self.mirror_cap and self.rng.random() < self.mirror_prob:
                self._mirrored[key] = count + 1
                self._queue.append(key)
        if (self.intercept_prob and len(ctx.corrupted) < ctx.t
                and self.rng.random() < self.intercept_prob):
            subset_size = self.rng.randint(0, ctx.n)
            return sorted(self.rng.sample(range(ctx.n), subset_size))
        return None

    def after_event(self, ctx, event) -> None:
        while self._queue:
            tag, kind = self._queue.pop(0)
            options = self._menu[(tag, kind)] + [self._fresh[(tag, kind)]]
            for corrupted in sorted(ctx.corrupted):
                for receiver in range(ctx.n):
                    payload = self.rng.choice(options)
                    ctx.inject(corrupted, receiver, tag, kind, payload,
                               self.rng.choice(self.delay_set))


class GradeSplitter(Adversary):
    """Best-effort grade-splitting heuristic: one honest half runs fast, the
    other slow, while corrupted parties equivocate between the two most common
    honest payloads per message slot."""

    name = "splitter"

    def __init__(self, fast_delay=1, slow_delay=3, mirror_cap: int = 3):
        self.fast_delay = fast_delay
        self.slow_delay = slow_delay
        self.mirror_cap = mirror_cap

    def begin(self, ctx: KernelContext) -> None:
        self.rng = random.Random(ctx.rng.getrandbits(64))
        for party in sorted(self.rng.sample(range(ctx.n), ctx.t)):
            ctx.corrupt(party)
        honest = [p for p in range(ctx.n) if ctx.is_honest(p)]
        self.rng.shuffle(honest)
        self.fast_half = set(honest[:len(honest) // 2 + 1])
        self._counts: dict[tuple, dict[bytes, int]] = {}
        self._mirrored: dict[tuple, int] = {}
        self._queue: list[tuple] = []

    def delay(self, ctx, sender, receiver, tag, kind, payload):
        return self.fast_delay if receiver in self.fast_half else self.slow_delay

    def on_multicast(self, ctx, sender, tag, kind, payload):
        key = (tag, kind)
        counts = self._counts.setdefault(key, {})
        counts[payload] = counts.get(payload, 0) + 1
        if ctx.corrupted and self._mirrored.get(key, 0) < self.mirror_cap:
            self._mirrored[key] = self._mirrored.get(key, 0) + 1
            self._queue.append(key)
        return None

    def after_event(self, ctx, event) -> None:
        while self._queue:
            key = self._queue.pop(0)
            tag, kind = key
            ranked = sorted(self._counts[key].items(), key=lambda kv: (-kv[1], kv[0]))
            first = ranked[0][0]
            second = ranked[1][0] if len(ranked) > 1 else _flip_one_bit(first, self.rng)
            for corrupted in sorted(ctx.corrupted):
                for receiver in range(ctx.n):
                    payload = first if receiver in self.fast_half else second
                    delay = self.fast_delay if receiver in self.fast_half else self.slow_delay
                    ctx.inject(corrupted, receiver, tag, kind, payload, delay)


class ScriptedAdversary(Adversary):
    """Test harness strategy: explicit delays, corruptions and intercepts."""

    name = "scripted"

    def __init__(self, delay_fn: Optional[Callable] = None, default_delay=1,
                 corrupt_at_begin=(), intercept_fn: Optional[Callable] = None,
                 begin_fn: Optional[Callable] = None,
                 after_event_fn: Optional[Callable] = None):
        self.delay_fn = delay_fn
        self.default_delay = default_delay
        self.corrupt_at_begin = tuple(corrupt_at_begin)
        self.intercept_fn = intercept_fn
        self.begin_fn = begin_fn
        self.after_event_fn = after_event_fn

    def begin(self, ctx):
        for party in self.corrupt_at_begin:
            ctx.corrupt(party)
        if self.begin_fn:
            self.begin_fn(ctx)

    def delay(self, ctx, sender, receiver, tag, kind, payload):
        if self.delay_fn is None:
            return self.default_delay
        return self.delay_fn(ctx, sender, receiver, tag, kind, payload)

    def on_multicast(self, ctx, sender, tag, kind, payload):
        if self.intercept_fn is None:
            return None
        return self.intercept_fn(ctx, sender, tag, kind, payload)

    def after_event(self, ctx, event):
        if self.after_event_fn:
            self.after_event_fn(ctx, event)


def strategy_random(seed: Optional[int] = None, delay_set=(1, 2), **kwargs) -> RandomAdversary:
    return RandomAdversary(seed, delay_set, **kwargs)


def strategy_grade_splitter() -> GradeSplitter:
    return GradeSplitter()


# ---------------------------------------------------------------------------
# Exhaustive bounded exploration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MenuItem:
    """One potential byzantine message (instance slot, kind, payload)."""

    tag: tuple
    kind: int
    payload: bytes


@dataclass
class OutcomeSet:
    """All terminal outcome vectors reachable within the exploration bounds."""

    outcomes: frozenset
    witnesses: dict
    states: int
    honest: tuple[int, ...]
    corrupted: tuple[int, ...]

    def outputs_only(self) -> frozenset:
        return frozenset(outcome[0] for outcome in self.outcomes)


@dataclass
class _State:
    now: int
    pending: list          # [(env_id, send_time, sender, receiver, tag, kind, payload)]
    autos: dict
    outputs: dict
    outputted: set
    halted: set
    remaining: frozenset
    next_id: int

    def clone(self) -> "_State":
        return _State(self.now, list(self.pending), copy.deepcopy(self.autos),
                      dict(self.outputs), set(self.outputted), set(self.halted),
                      self.remaining, self.next_id)


def _object_state(obj):
    if hasattr(obj, "__dict__"):
        return vars(obj)
    state = {}
    for klass in type(obj).__mro__:
        for slot in getattr(klass, "__slots__", ()):
            if hasattr(obj, slot):
                state[slot] = getattr(obj, slot)
    return state


def _canon(obj):
    if obj is None or isinstance(obj, (int, bytes, str, bool)):
        return obj
    if isinstance(obj, Fraction):
        return ("F", obj.numerator, obj.denominator)
    if isinstance(obj, (tuple, list)):
        return ("T",) + tuple(_canon(x) for x in obj)
    if isinstance(obj, dict):
        items = [( _canon(k), _canon(v)) for k, v in obj.items()]
        items.sort(key=repr)
        return ("D",) + tuple(items)
    if isinstance(obj, (set, frozenset)):
        members = sorted((_canon(x) for x in obj), key=repr)
        return ("S",) + tuple(members)
    return ("O", type(obj).__name__,
            _canon({k: v for k, v in _object_state(obj).items()}))


class _Explorer:
    def __init__(self, config: SimConfig, factory, inputs, delay_set, menu,
                 corrupted, max_states):
        config.validate()
        if config.n > 4:
            raise InvalidConfig("exhaustive mode supports n <= 4")
        if len(set(delay_set)) > 2 or any(d <= 0 for d in delay_set):
            raise InvalidConfig("exhaustive mode supports positive delay sets of size <= 2")
        self.n, self.t = config.n, config.t
        self.delay_set = tuple(sorted(set(delay_set)))
        self.max_states = max_states
        self.corrupted = tuple(sorted(corrupted if corrupted is not None
                                      else range(config.n - config.t, config.n)))
        if len(self.corrupted) > config.t:
            raise InvalidConfig("more scripted corruptions than the budget t")
        self.honest = tuple(p for p in range(config.n) if p not in self.corrupted)
        self.factory = factory
        self.inputs = inputs
        self.items = tuple((sender, receiver, item)
                           for sender in self.corrupted
                           for receiver in self.honest
                           for item in menu)

    def _initial(self) -> _State:
        state = _State(0, [], {p: self.factory(p) for p in self.honest},
                       {}, set(), set(), frozenset(range(len(self.items))), 0)
        for party in self.honest:
            if self.inputs[party] is not None:
                self._effects(state, party, state.autos[party].on_input(self.inputs[party]))
        return state

    def _effects(self, state: _State, party: int, effects) -> None:
        for effect in effects:
            if party in state.halted:
                return
            if isinstance(effect, Multicast):
                for receiver in range(self.n):
                    if receiver in state.halted or receiver not in state.autos:
                        continue
                    state.pending.append((state.next_id, state.now, party, receiver,
                                          effect.tag, effect.kind, effect.payload))
                    state.next_id += 1
            elif isinstance(effect, Output):
                if party not in state.outputted:
                    state.outputted.add(party)
                    state.outputs[party] = effect.value
            elif isinstance(effect, Halt):
                state.halted.add(party)
                state.pending = [env for env in state.pending if env[3] != party]
            elif isinstance(effect, Signal):
                raise AssertionError(f"unconsumed signal {effect}")
        return

    def _actions(self, state: _State) -> list:
        actions = []
        if state.pending:
            deadline = min(env[1] + self.delay_set[-1] for env in state.pending)
            for env in sorted(state.pending):
                for d in self.delay_set:
                    when = env[1] + d
                    if state.now <= when <= deadline:
                        actions.append(("deliver", env[0], when))
        for index in sorted(state.remaining):
            if self.items[index][1] not in state.halted:
                actions.append(("inject", index))
        if not state.pending:
            actions.append(("stop",))
        return actions

    def _apply(self, state: _State, action) -> _State:
        child = state.clone()
        verb = action[0]
        if verb == "deliver":
            env_id, when = action[1], action[2]
            env = next(e for e in child.pending if e[0] == env_id)
            child.pending.remove(env)
            child.now = when
            _, _, sender, receiver, tag, kind, payload = env
            if receiver not in child.halted:
                self._effects(child, receiver,
                              child.autos[receiver].on_message(sender, tag, kind, payload))
        elif verb == "inject":
            index = action[1]
            child.remaining = child.remaining - {index}
            sender, receiver, item = self.items[index]
            if receiver not in child.halted:
                self._effects(child, receiver,
                              child.autos[receiver].on_message(sender, item.tag,
                                                               item.kind, item.payload))
        else:
            child.remaining = frozenset()
        return child

    def _digest(self, state: _State) -> bytes:
        pending = sorted((env[1] - state.now, env[2], env[3], env[4], env[5], env[6])
                         for env in state.pending)
        canon = ("K", tuple(pending),
                 tuple((p, _canon(state.autos[p])) for p in self.honest),
                 _canon(state.outputs), ("S",) + tuple(sorted(state.halted)),
                 tuple(sorted(state.remaining)))
        return hashlib.blake2b(pickle.dumps(canon, protocol=4), digest_size=16).digest()

    def _outcome(self, state: _State):
        return (tuple(state.outputs.get(p) for p in self.honest),
                tuple(p in state.halted for p in self.honest))

    def run(self) -> OutcomeSet:
        initial = self._initial()
        outcomes = {}
        visited = {self._digest(initial)}
        states = 1
        stack = [(initial, iter(self._actions(initial)), ())]
        if not initial.pending and not initial.remaining:
            outcomes[self._outcome(initial)] = ()
        while stack:
            state, action_iter, path = stack[-1]
            action = next(action_iter, None)
            if action is None:
                stack.pop()
                continue
            child = self._apply(state, action)
            digest = self._digest(child)
            if digest in visited:
                continue
            visited.add(digest)
            states += 1
            if states > self.max_states:
                raise BoundExceeded(f"exploration exceeded {self.max_states} states")
            child_path = path + (self._action_witness(state, action),)
            if not child.pending and not child.remaining:
                outcome = self._outcome(child)
                if outcome not in outcomes:
                    outcomes[outcome] = child_path
                continue
            stack.append((child, iter(self._actions(child)), child_path))
        return OutcomeSet(frozenset(outcomes), outcomes, states, self.honest,
                          self.corrupted)

    def _action_witness(self, state: _State, action):
        if action[0] == "deliver":
            env = next(e for e in state.pending if e[0] == action[1])
            _, send, sender, receiver, tag, kind, payload = env
            return ("deliver", sender, receiver, tag, kind, payload, action[2])
        if action[0] == "inject":
            sender, receiver, item = self.items[action[1]]
            return ("inject", sender, receiver, item.tag, item.kind, item.payload,
                    state.now)
        return ("stop",)


def exhaustive_explore(config: SimConfig, factory, inputs, delay_set, menu,
                       corrupted=None, max_states: int = 2_000_000) -> OutcomeSet:
    """Enumerate all outcomes reachable with delays from `delay_set` and
    byzantine messages from `menu`; raises BoundExceeded past `max_states`."""
    return _Explorer(config, factory, inputs, delay_set, menu, corrupted,
                     max_states).run()


def gc1_menu(values, bits, include_bot: bool = True, tag: tuple = ()) -> list[MenuItem]:
    """Byzantine message menu for the 1-graded stage: echoes (optionally on
    bottom) and proposals over the given value set."""
    from .encoding import encode_value
    from . import graded
    items = []
    for value in values:
        items.append(MenuItem(tag, graded.M_ECHO, encode_value(value, bits)))
        items.append(MenuItem(tag, graded.M_PROP, encode_value(value, bits)))
    if include_bot:
        items.append(MenuItem(tag, graded.M_ECHO_BOT, b""))
    return items


def prop_menu(values, tag: tuple = ()) -> list[MenuItem]:
    from . import graded
    items = []
    for value in values:
        items.append(MenuItem(tag, graded.M_ECHO, value))
        items.append(MenuItem(tag, graded.M_PROP, value))
    return items


def term_menu(values, include_ready: bool = True, tag: tuple = ()) -> list[MenuItem]:
    from . import terminate
    items = [MenuItem(tag, terminate.M_ECHO, value) for value in values]
    if include_ready:
        items.append(MenuItem(tag, terminate.M_READY, b""))
    return items


class _WitnessAdversary(Adversary):
    """Replays one explored leaf as a concrete schedule (soundness check)."""

    name = "witness-replay"

    def __init__(self, witness, corrupted, fallback_delay):
        self.witness = witness
        self.corrupted = corrupted
        self.fallback = fallback_delay
        epsilon = Fraction(1, 1 << 20)
        self.order_times = {}
        self.injections = []
        for position, step in enumerate(witness):
            if step[0] == "stop":
                continue
            verb, sender, receiver, tag, kind, payload, when = step
            moment = Fraction(when) + (position + 1) * epsilon
            key = (sender, receiver, tag, kind, payload)
            if verb == "deliver":
                assert key not in self.order_times, "ambiguous witness content key"
                self.order_times[key] = moment
            else:
                self.injections.append((key, moment))

    def begin(self, ctx):
        for party in self.corrupted:
            ctx.corrupt(party)
        for (sender, receiver, tag, kind, payload), moment in self.injections:
            ctx.inject(sender, receiver, tag, kind, payload, moment)

    def delay(self, ctx, sender, receiver, tag, kind, payload):
        moment = self.order_times.get((sender, receiver, tag, kind, payload))
        if moment is None:
            return self.fallback
        return moment - ctx.now


def replay_witness(config: SimConfig, factory, inputs, outcome_set: OutcomeSet,
                   outcome, delay_set) -> SimResult:
    """Re-run one explored outcome through the kernel; outputs must agree."""
    witness = outcome_set.witnesses[outcome]
    adversary = _WitnessAdversary(witness, outcome_set.corrupted, min(delay_set))
    replay_config = SimConfig(config.n, config.t, seed=0, adversary=adversary,
                              event_budget=config.event_budget)
    return run_simulation(replay_config, factory, inputs)
