"""Assembly: turn an AppConfig plus a data directory into a running stack."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .clock import Clock, SimClock
from .config import AppConfig
from .dag.engine import Orchestrator
from .sources.simulator import SourceHub
from .store.engine import MedallionStore


@dataclass
class Runtime:
    config: AppConfig
    clock: Clock
    store: MedallionStore
    hub: SourceHub
    orchestrator: Orchestrator

    def close(self) -> None:
        self.store.close()


def build_runtime(
    config: AppConfig,
    data_dir: Path | str,
    *,
    clock: Optional[Clock] = None,
    worker_pool_size: int = 4,
) -> Runtime:
    clock = clock or SimClock(config.sim_start)
    store = MedallionStore(data_dir, clock=clock)
    hub = SourceHub(config.sources, clock)
    orchestrator = Orchestrator(
        store, hub, clock, [config.dag], config.settings, worker_pool_size=worker_pool_size
    )
    return Runtime(config=config, clock=clock, store=store, hub=hub, orchestrator=orchestrator)
