"""Central display model: per-bed tiles, event summary, terminal rendering.

A tile's clinical state follows the verdict stream: Orange while any Orange
window is open, Green otherwise, and Red after any Red1/Red2. Red latches
until an operator acknowledges it; an unacknowledged emergency that silently
clears is the one failure mode this display must never have. Data warnings
are a separate badge that co-displays with the clinical state and drives the
shared console warning.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from io import TextIOBase
from pathlib import Path

from .engine import Verdict, VerdictKind
from .validity import DataWarning

MAX_BEDS = 5  # the display shows up to five patient statuses


class TileState(Enum):
    UNOCCUPIED = "unoccupied"
    GREEN = "green"
    ORANGE = "orange"
    RED = "red"


class BoardError(Exception):
    pass


@dataclass
class BedTile:
    bed: str
    state: TileState = TileState.UNOCCUPIED
    last_delta: float | None = None
    last_update: float | None = None
    open_orange_count: int = 0
    data_warning: bool = False
    red_latched: bool = False

    def resting_state(self) -> TileState:
        """What the tile shows when no Red is latched."""
        if self.state is TileState.UNOCCUPIED and self.last_update is None:
            return TileState.UNOCCUPIED
        return TileState.ORANGE if self.open_orange_count > 0 else TileState.GREEN


@dataclass
class BoardState:
    tiles: dict[str, BedTile]
    detected: int = 0  # emergency events seen (Red1 + Red2)
    addressed: int = 0  # emergencies acknowledged by an operator
    notices: list[str] = field(default_factory=list)

    @classmethod
    def for_beds(cls, beds: list[str]) -> "BoardState":
        if not beds:
            raise BoardError("at least one bed required")
        if len(beds) > MAX_BEDS:
            raise BoardError(f"at most {MAX_BEDS} beds supported, got {len(beds)}")
        if len(set(beds)) != len(beds):
            raise BoardError("bed identifiers must be unique")
        return cls(tiles={bed: BedTile(bed) for bed in beds})

    @property
    def console_warning(self) -> bool:
        return any(tile.data_warning for tile in self.tiles.values())

    def _tile(self, bed: str) -> BedTile:
        try:
            return self.tiles[bed]
        except KeyError:
            raise BoardError(f"unknown bed {bed!r}") from None

    def apply_event(
        self, bed: str, event: Verdict | DataWarning, now: float | None = None
    ) -> None:
        tile = self._tile(bed)
        now = time.time() if now is None else now
        if isinstance(event, DataWarning):
            tile.data_warning = event.active
            return
        tile.last_delta = event.delta
        tile.last_update = now
        if event.kind is VerdictKind.ORANGE:
            tile.open_orange_count += 1
        elif event.resolves_timestep is not None:
            # a Green or Red2 resolution closes the Orange window it judged
            tile.open_orange_count = max(0, tile.open_orange_count - 1)
        if event.kind in (VerdictKind.RED1, VerdictKind.RED2):
            self.detected += 1
            tile.red_latched = True
            tile.state = TileState.RED
        elif not tile.red_latched:
            tile.state = tile.resting_state()

    def acknowledge(self, bed: str) -> bool:
        """Clear a latched Red; returns False (with a notice) if none was lit."""
        tile = self._tile(bed)
        if not tile.red_latched:
            self.notices.append(f"{bed}: nothing to acknowledge")
            return False
        tile.red_latched = False
        tile.state = tile.resting_state()
        self.addressed += 1
        return True


# -- rendering ---------------------------------------------------------------

_STATE_WORDS = {
    TileState.UNOCCUPIED: "unoccupied",
    TileState.GREEN: "GREEN",
    TileState.ORANGE: "ORANGE",
    TileState.RED: "RED",
}
# alternating glyphs approximate the flashing of urgent tiles
_FLASH = {TileState.RED: ("*** RED ***", "    RED    "),
          TileState.ORANGE: ("  ORANGE > ", "  ORANGE   ")}


def render(board: BoardState, phase: int = 0, now: float | None = None) -> str:
    """Deterministic fixed-width screen for one (state, phase, clock) triple."""
    now = time.time() if now is None else now
    lines = []
    lines.append(f"{'bed':<8} {'state':<11} {'delta':>8} {'age':>6}  flags")
    for bed, tile in board.tiles.items():
        if tile.state in _FLASH:
            word = _FLASH[tile.state][phase % 2]
        else:
            word = _STATE_WORDS[tile.state]
        delta = "-" if tile.last_delta is None else f"{tile.last_delta:.4f}"
        if tile.last_update is None:
            age = "-"
        else:
            age = f"{max(0.0, now - tile.last_update):.0f}s"
        badge = "DATA-WARNING" if tile.data_warning else ""
        lines.append(f"{bed:<8} {word:<11} {delta:>8} {age:>6}  {badge}")
    lines.append(f"emergencies detected: {board.detected}  addressed: {board.addressed}")
    if board.console_warning:
        lines.append("!! DATA WARNING: one or more beds sending unreliable data !!")
    return "\n".join(lines) + "\n"


# -- event archive -----------------------------------------------------------

EVENT_HEADER = "timestamp,bed,kind,timestep,delta,resolves_timestep"


def event_row(
    bed: str, event: Verdict | DataWarning, wall_time: float | None = None
) -> str:
    wall_time = time.time() if wall_time is None else wall_time
    stamp = f"{wall_time:.3f}"
    if isinstance(event, DataWarning):
        kind = "data-warning-raised" if event.active else "data-warning-cleared"
        return f"{stamp},{bed},{kind},{event.at_timestep},,"
    resolves = "" if event.resolves_timestep is None else str(event.resolves_timestep)
    return (
        f"{stamp},{bed},{event.kind.value},{event.at_timestep},"
        f"{event.delta:.6f},{resolves}"
    )


class EventArchive:
    """Append-only CSV log of every verdict and data-warning transition."""

    def __init__(self, target: str | Path | TextIOBase) -> None:
        if isinstance(target, TextIOBase):
            self._handle = target
            self._owns = False
        else:
            self._handle = Path(target).open("a", encoding="utf-8")
            self._owns = True
        if self._handle.tell() == 0:
            self._handle.write(EVENT_HEADER + "\n")

    def append(
        self, bed: str, event: Verdict | DataWarning, wall_time: float | None = None
    ) -> None:
        self._handle.write(event_row(bed, event, wall_time) + "\n")

    def close(self) -> None:
        self._handle.flush()
        if self._owns:
            self._handle.close()

    def __enter__(self) -> "EventArchive":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
