"""Factories for hand-built instances, tasks, and states used across tests."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from mplq.instance import (Customer, CustomerLocation, FleetSpec, Instance,
                           ParkingSpace, Position, TimeWindow)
from mplq.state import SearchState
from mplq.taskgen import Task, TaskPool


def make_space(space_id: int, x: float, y: float, window: tuple[float, float] = (0.0, 1440.0),
               service_time: float = 30.0) -> ParkingSpace:
    return ParkingSpace(id=space_id, position=Position(x, y),
                        window=TimeWindow(*window), service_time=service_time)


def make_customer(cid: int, demand: int, locs: Sequence[tuple]) -> Customer:
    locations = tuple(
        CustomerLocation(position=Position(x, y), window=TimeWindow(*win), max_walk=walk)
        for (x, y, win, walk) in locs
    )
    return Customer(id=cid, demand=demand, locations=locations)


def make_instance(spaces: Sequence[ParkingSpace], customers: Sequence[Customer] = (),
                  *, capacity: float = 20.0, speed: float = 0.7,
                  max_lockers: Optional[int] = None, fixed_cost: float = 1.0,
                  unit_travel_cost: float = 1.0, buffer: float = 10.0,
                  weights: tuple[float, float] = (5.0, 1.0)) -> Instance:
    if max_lockers is None:
        max_lockers = max(4, len(spaces) * 4)
    fleet = FleetSpec(max_lockers=max_lockers, capacity=capacity, speed=speed,
                      fixed_cost=fixed_cost, unit_travel_cost=unit_travel_cost)
    return Instance(depot=Position(0.0, 0.0), spaces=tuple(spaces),
                    customers=tuple(customers), fleet=fleet, buffer=buffer,
                    weights=weights)


def make_task(space_id: int, a: int = 1, demand: int = 1,
              window: tuple[float, float] = (0.0, 1440.0),
              members: Sequence[tuple[int, float]] = ()) -> Task:
    return Task(space_id=space_id, sub_index=a, demand=demand,
                window=TimeWindow(*window), members=tuple(members))


def make_pool(tasks: Sequence[Task]) -> TaskPool:
    customer_task = {}
    for tid, task in enumerate(tasks):
        for cid, _ in task.members:
            customer_task[cid] = tid
    return TaskPool(tasks=tuple(tasks), customer_task=customer_task, unservable=())


def make_state(x1: Sequence[int], x2: Sequence[int]) -> SearchState:
    return SearchState(x1=np.array(x1, dtype=np.int64), x2=np.array(x2, dtype=np.int64))
