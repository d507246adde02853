"""Round orchestration for the decentralized training protocol.

Each round: every client trains locally, the colluding clients jointly
compute one poisoned broadcast from their own trained updates, vectors move
one hop along the overlay graph, every client aggregates its local view with
the configured rule, and all clients are scored on a shared test set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import aggregation, attacks, data, nn, seeding, topology
from .config import ExperimentSettings, malicious_count
from .errors import RunError, SimulationError

BENIGN = "benign"
MALICIOUS = "malicious"


@dataclass
class ClientState:
    id: int
    role: str
    params: np.ndarray
    shard: np.ndarray


@dataclass
class ClientMetrics:
    id: int
    role: str
    loss: float
    accuracy: float
    macro_f1: float


@dataclass
class RoundRecord:
    round: int
    per_client: list[ClientMetrics]
    mean_benign_f1: float


@dataclass
class ExperimentResult:
    records: list[RoundRecord]
    summary: dict


@dataclass
class Simulation:
    """Resolved run state shared by the per-round steps."""

    cfg: ExperimentSettings
    model_spec: nn.ModelSpec
    graph: topology.TopologyGraph
    train_set: data.Dataset
    test_set: data.Dataset
    states: list[ClientState]
    attack_fn: object
    rule: object
    malicious_ids: list[int] = field(default_factory=list)


def assign_roles(cfg: ExperimentSettings) -> list[str]:
    """Seeded sampling of malicious ids; a permutation prefix, so raising the
    fraction only ever adds attackers. ``exclude_hub`` keeps client 0 benign
    on star topologies."""
    clients = cfg.clients
    m = malicious_count(clients, cfg.malicious_fraction)
    pool = list(range(clients))
    if cfg.exclude_hub and cfg.topology == "star":
        pool = pool[1:]
    if m > len(pool):
        raise RunError(f"cannot place {m} malicious clients into a pool of {len(pool)}")
    rng = seeding.generator(cfg.seed, seeding.ROLE_STREAM)
    order = rng.permutation(len(pool))
    malicious = {pool[i] for i in order[:m]}
    return [MALICIOUS if k in malicious else BENIGN for k in range(clients)]


def _build_datasets(cfg: ExperimentSettings) -> tuple[data.Dataset, data.Dataset]:
    source = cfg.dataset
    if source.kind == "blobs":
        seed = source.seed if source.seed is not None else seeding.mix(cfg.seed, seeding.DATA_STREAM)
        return data.blob_train_test(
            source.classes,
            source.train_per_class,
            source.test_per_class,
            source.feature_dim,
            source.spread,
            seed,
        )
    train = data.load_idx(source.train_images, source.train_labels)
    test = data.load_idx(source.test_images, source.test_labels)
    classes = max(train.classes, test.classes)
    train = data.Dataset(train.features, train.labels, classes)
    test = data.Dataset(test.features, test.labels, classes)
    return train, test


def _setup(cfg: ExperimentSettings, initial_params=None) -> Simulation:
    train_set, test_set = _build_datasets(cfg)
    model_spec = nn.ModelSpec((train_set.features.shape[1], *cfg.model.hidden, train_set.classes))
    graph = topology.build(cfg.topology, cfg.clients)
    roles = assign_roles(cfg)
    shards = data.partition_iid(train_set, cfg.clients, seeding.mix(cfg.seed, seeding.PARTITION_STREAM))
    states = []
    for k in range(cfg.clients):
        if initial_params is not None:
            params = np.array(initial_params[k], dtype=np.float64, copy=True)
        else:
            params = nn.init_params(model_spec, seeding.mix(cfg.seed, k, seeding.INIT_STREAM))
        states.append(ClientState(k, roles[k], params, shards[k]))
    attack_fn = attacks.make_attack(
        cfg.attack.name,
        top_percent=cfg.attack.top_percent,
        per_client_masks=cfg.attack.per_client_masks,
    )
    rule = aggregation.make_rule(cfg.aggregation.name, trim_ratio=cfg.aggregation.trim_ratio, f=cfg.aggregation.f)
    malicious_ids = sorted(st.id for st in states if st.role == MALICIOUS)
    return Simulation(cfg, model_spec, graph, train_set, test_set, states, attack_fn, rule, malicious_ids)


def _evaluate_clients(sim: Simulation, round_index: int) -> tuple[list[ClientMetrics], float]:
    per_client = []
    benign_scores = []
    for st in sim.states:
        try:
            metrics = nn.evaluate(st.params, sim.model_spec, sim.test_set.features, sim.test_set.labels)
        except SimulationError as e:
            raise RunError(f"round {round_index}, client {st.id}: evaluation failed: {e}") from e
        score = metrics.f1_average(sim.cfg.f1_average)
        per_client.append(ClientMetrics(st.id, st.role, metrics.loss, metrics.accuracy, score))
        if st.role == BENIGN:
            benign_scores.append(score)
    return per_client, float(np.mean(benign_scores))


def run_round(sim: Simulation, round_index: int) -> RoundRecord:
    """Train, attack, exchange, aggregate, and evaluate one synchronous round."""
    cfg = sim.cfg

    trained: dict[int, np.ndarray] = {}
    for st in sim.states:
        train_cfg = nn.TrainConfig(
            learning_rate=cfg.train.learning_rate,
            batch_size=cfg.train.batch_size,
            local_epochs=cfg.train.local_epochs,
            seed=seeding.mix(cfg.seed, st.id, round_index, seeding.TRAIN_STREAM),
        )
        try:
            trained[st.id] = nn.local_train(
                st.params,
                sim.model_spec,
                sim.train_set.features[st.shard],
                sim.train_set.labels[st.shard],
                train_cfg,
            )
        except SimulationError as e:
            raise RunError(f"round {round_index}, client {st.id}: local training failed: {e}") from e

    # Benign clients broadcast their trained update; the collusion replaces
    # the malicious broadcasts with the attack output.
    broadcasts = dict(trained)
    if sim.malicious_ids:
        columns = np.column_stack([trained[i] for i in sim.malicious_ids])
        assert columns.shape[1] == len(sim.malicious_ids), "attack must see exactly the malicious updates"
        ctx = attacks.AttackContext(
            updates=columns,
            total_clients=cfg.clients,
            malicious_count=len(sim.malicious_ids),
            round_index=round_index,
        )
        try:
            poison = sim.attack_fn(ctx)
        except SimulationError as e:
            raise RunError(f"round {round_index}: attack '{cfg.attack.name}' failed: {e}") from e
        if poison.ndim == 1:
            for mid in sim.malicious_ids:
                broadcasts[mid] = poison
        else:
            for slot, mid in enumerate(sim.malicious_ids):
                broadcasts[mid] = poison[:, slot]

    new_params: dict[int, np.ndarray] = {}
    for st in sim.states:
        neighbor_ids = topology.neighbors(sim.graph, st.id)
        inp = aggregation.AggregationInput(
            own_id=st.id,
            own=trained[st.id],
            received=[(j, broadcasts[j]) for j in neighbor_ids],
        )
        try:
            new_params[st.id] = sim.rule(inp)
        except SimulationError as e:
            raise RunError(f"round {round_index}, client {st.id}: aggregation failed: {e}") from e

    if cfg.malicious_adopt_poison:
        for mid in sim.malicious_ids:
            new_params[mid] = np.array(broadcasts[mid], copy=True)

    for st in sim.states:
        st.params = new_params[st.id]

    per_client, mean_benign = _evaluate_clients(sim, round_index)
    return RoundRecord(round_index, per_client, mean_benign)


def run_experiment(cfg: ExperimentSettings, initial_params=None) -> ExperimentResult:
    """Run all configured rounds; fully deterministic for a fixed config.

    ``initial_params`` optionally overrides the seeded per-client
    initialization (one vector per client).
    """
    sim = _setup(cfg, initial_params=initial_params)
    records = [run_round(sim, t) for t in range(cfg.rounds)]
    if records:
        last = records[-1]
        final_round = last.round
        per_client, mean_benign = last.per_client, last.mean_benign_f1
    else:
        final_round = None
        per_client, mean_benign = _evaluate_clients(sim, 0)
    summary = {
        "final_round": final_round,
        "mean_benign_f1": mean_benign,
        "per_client": [
            {"id": c.id, "role": c.role, "loss": c.loss, "accuracy": c.accuracy, "macro_f1": c.macro_f1}
            for c in per_client
        ],
    }
    return ExperimentResult(records, summary)
