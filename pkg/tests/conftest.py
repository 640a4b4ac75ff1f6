import pytest

from fairslot.influence import ExposureMatrix, build_exposure
from fairslot.instances import toy_market
from fairslot.model import Advertiser, Billboard, BillboardSlot, Instance


@pytest.fixture
def toy():
    return toy_market()


@pytest.fixture
def toy_exposure(toy):
    return build_exposure(toy)


def market(entries, n_slots, n_traj, advertisers, costs=None):
    """Instance + exposure built straight from (slot, trajectory, p) triples.

    One billboard per slot, each with a single window covering the horizon,
    so the instance is valid without any check-ins.
    """
    costs = costs or [0.0] * n_slots
    billboards = [Billboard(f"b{k}", 0.0, 0.01 * k, 1.0) for k in range(n_slots)]
    slots = [BillboardSlot(f"s{k:02d}", f"b{k}", 0.0, 3600.0, 0.0, float(costs[k]))
             for k in range(n_slots)]
    advs = [a if isinstance(a, Advertiser) else Advertiser(f"a{i + 1}", *a)
            for i, a in enumerate(advertisers)]
    inst = Instance(billboards, slots, (), advs, horizon=(0.0, 3600.0))
    exposure = ExposureMatrix.from_entries(entries, n_slots, n_traj,
                                           [s.slot_id for s in slots])
    return inst, exposure
