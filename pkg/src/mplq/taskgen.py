"""Turn parking-space availability into a finite pool of schedulable tasks.

Each space's availability window is first tightened to the range actually
covered by its assigned customers, then cut into equal-length slices of the
space's service time. Every slice that attracts at least one customer becomes
a task: the atomic unit the solvers allocate to lockers and sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .instance import Assignment, Instance, ParkingSpace, TimeWindow


@dataclass(frozen=True)
class SubInterval:
    """The a-th service-time-length slice of a space's availability (a is 1-based)."""

    space_id: int
    index: int
    window: TimeWindow


@dataclass(frozen=True)
class Task:
    """Demand bundled into one sub-interval at one space.

    ``members`` holds (customer id, earliest pickup time) pairs; the earliest
    pickup is the start of the customer's presence window at their assigned
    location, which bounds how soon the handover can happen.
    """

    space_id: int
    sub_index: int
    demand: int
    window: TimeWindow
    members: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class TaskPool:
    """Ordered task list plus the customer membership index."""

    tasks: tuple[Task, ...]
    customer_task: dict[int, int]
    unservable: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tasks)


def reduce_availability(space: ParkingSpace,
                        assigned_windows: Sequence[TimeWindow]) -> Optional[TimeWindow]:
    """Tighten a space's availability to the span its customers actually cover.

    Returns the intersection of [E, L] with [earliest customer start, latest
    customer end], or None when no customers are assigned or the intersection
    is empty.
    """
    if not assigned_windows:
        return None
    lo = max(space.window.start, min(w.start for w in assigned_windows))
    hi = min(space.window.end, max(w.end for w in assigned_windows))
    if hi <= lo:
        return None
    return TimeWindow(lo, hi)


def partition_subintervals(avail: TimeWindow, service_time: float,
                           space_id: int = 0) -> list[SubInterval]:
    """Cut ``avail`` into floor(span / service_time) slices of exactly ``service_time``.

    The a-th slice is [start + (a-1)*S, start + a*S]; any trailing remainder
    shorter than the service time is dropped.
    """
    if service_time <= 0:
        raise ValueError("service_time must be > 0")
    count = int(math.floor(avail.span / service_time))
    return [
        SubInterval(
            space_id=space_id,
            index=a,
            window=TimeWindow(avail.start + (a - 1) * service_time,
                              avail.start + a * service_time),
        )
        for a in range(1, count + 1)
    ]


def build_tasks(instance: Instance, assignment: Assignment) -> TaskPool:
    """Place every assigned customer into a sub-interval and bundle the demand.

    A customer joins the earliest sub-interval of their assigned space whose
    window overlaps their presence window by at least the instance buffer
    time. Customers with no sufficiently-overlapping sub-interval are reported
    unservable. Slices that attract no customer produce no task.
    """
    per_space: dict[int, list[int]] = {}
    for cid, (space_id, _) in assignment.assigned.items():
        per_space.setdefault(space_id, []).append(cid)

    tasks: list[Task] = []
    customer_task: dict[int, int] = {}
    unservable: list[int] = []

    for sp in instance.spaces:
        cids = sorted(per_space.get(sp.id, ()))
        if not cids:
            continue
        windows = []
        for cid in cids:
            _, loc_idx = assignment.assigned[cid]
            windows.append(instance.customer_by_id(cid).locations[loc_idx].window)
        avail = reduce_availability(sp, windows)
        subs = partition_subintervals(avail, sp.service_time, sp.id) if avail else []

        buckets: dict[int, list[tuple[int, float]]] = {}
        for cid, win in zip(cids, windows):
            placed = False
            for sub in subs:
                if sub.window.overlap(win) >= instance.buffer:
                    buckets.setdefault(sub.index, []).append((cid, win.start))
                    placed = True
                    break
            if not placed:
                unservable.append(cid)

        for sub in subs:
            members = buckets.get(sub.index)
            if not members:
                continue
            demand = sum(instance.customer_by_id(cid).demand for cid, _ in members)
            task_id = len(tasks)
            tasks.append(
                Task(
                    space_id=sp.id,
                    sub_index=sub.index,
                    demand=demand,
                    window=sub.window,
                    members=tuple(members),
                )
            )
            for cid, _ in members:
                customer_task[cid] = task_id

    return TaskPool(tasks=tuple(tasks), customer_task=customer_task,
                    unservable=tuple(sorted(unservable)))


def write_taskpool_csv(pool: TaskPool, path: Union[str, Path]) -> None:
    lines = ["task_id,space_id,a,e_min,l_min,q,member_customer_ids"]
    for tid, task in enumerate(pool.tasks):
        members = ";".join(str(cid) for cid, _ in task.members)
        lines.append(
            f"{tid},{task.space_id},{task.sub_index},{task.window.start!r},"
            f"{task.window.end!r},{task.demand},{members}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


__all__ = [
    "SubInterval",
    "Task",
    "TaskPool",
    "reduce_availability",
    "partition_subintervals",
    "build_tasks",
    "write_taskpool_csv",
]
