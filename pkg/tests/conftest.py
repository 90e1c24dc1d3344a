import functools

from coordnet.features import community_networks, labeled_vectors
from coordnet.harness import CommunityCorpus
from coordnet.synthgen import generate, scenario_library


@functools.lru_cache(maxsize=None)
def scenario(name):
    return generate(scenario_library()[name])


@functools.lru_cache(maxsize=None)
def scenario_vectors(name, threshold=60):
    corp = scenario(name)
    labels = {cid: int(lab == "SIO") for cid, lab in corp.labels().items()}
    return tuple(labeled_vectors(corp.events, labels, threshold, ("daily", "weekly")))


def scenario_corpus(name, aggregation):
    return CommunityCorpus.from_vectors(scenario_vectors(name), aggregation)


@functools.lru_cache(maxsize=None)
def scenario_networks(name, community_id, threshold=60):
    return community_networks(scenario(name).events[community_id], community_id, threshold)
