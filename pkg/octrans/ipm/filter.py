"""Filter of (constraint violation, barrier objective) pairs."""

from dataclasses import dataclass, field
from typing import List, Tuple

Entry = Tuple[float, float]


@dataclass
class Filter:
    """Taboo region for the line search.

    Stored pairs already include the sufficient-decrease margins, so a trial
    point is acceptable when, against every entry, it has a strictly smaller
    violation or a strictly smaller barrier objective. No stored entry
    dominates another.
    """

    gamma_theta: float = 1e-5
    gamma_phi: float = 1e-8
    entries: List[Entry] = field(default_factory=list)

    def reset(self, theta_max: float) -> None:
        """Keep only the upper bound on the violation."""
        self.entries = [(theta_max, float("-inf"))]

    def acceptable(self, theta: float, phi: float) -> bool:
        return all(theta < t or phi < p for t, p in self.entries)

    def add(self, theta: float, phi: float) -> None:
        """Add the margin-shifted pair for an accepted iterate ``(theta, phi)``."""
        new = ((1.0 - self.gamma_theta) * theta, phi - self.gamma_phi * theta)
        self.entries = [
            e for e in self.entries if not (new[0] <= e[0] and new[1] <= e[1])
        ]
        self.entries.append(new)

    def __len__(self) -> int:
        return len(self.entries)
