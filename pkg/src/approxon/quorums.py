"""Named quorum-threshold sites, with a single-site mutation hook.

The mutation hook exists purely so the acceptance suite can verify the tests
have teeth: flipping one threshold off by one should trip at least one
criterion.  Production paths always run unmutated.
"""

from __future__ import annotations

from contextlib import contextmanager

# site name -> base threshold as a function of t
_SMALL = ("gc1_echo_bot", "gc1_v_add", "term_adopt", "term_ready_amplify")
_BIG = ("gc1_w_add", "term_ready_echo", "term_ready_count")

ALL_SITES = _SMALL + _BIG

_mutated_site: str | None = None


def threshold(site: str, t: int) -> int:
    if site in _SMALL:
        base = t + 1
    elif site in _BIG:
        base = 2 * t + 1
    else:
        raise KeyError(f"unknown quorum site {site!r}")
    if site == _mutated_site:
        base -= 1
    return base


@contextmanager
def mutated(site: str):
    """Run a block with one threshold lowered by one."""
    global _mutated_site
    if site not in ALL_SITES:
        raise KeyError(f"unknown quorum site {site!r}")
    previous = _mutated_site
    _mutated_site = site
    try:
        yield
    finally:
        _mutated_site = previous
