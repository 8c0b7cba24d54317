"""Layer 2 algebra: polynomial perturbation, per-node sums, aggregator solve.

Each participant hides its value v inside a random quadratic
v + R1*s + R2*s^2 evaluated at per-participant seeds s, over a prime field.
Summing everyone's share at one seed gives F(s) = D + (sum R1)*s +
(sum R2)*s^2 with D the sum of all private values, so the aggregator
recovers D exactly by interpolating the F values at the distinct seeds and
reading off F(0).  The n-party generalization (degree n-1 masks, n seeds)
serves as the cluster-based baseline to compare against.

All arithmetic is exact; there are no tolerances anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .keymgmt import (
    AggregatorNode,
    KeyIndexAnnouncement,
    SealedFrame,
    SourceNode,
    af_resolve_key,
    establish_ss_channel,
    generate_pool,
    register_pair,
    select_session_key,
    source_resolve_key,
    ss_receive,
    ss_send,
    DEFAULT_CIPHER,
    NONCE_LEN,
)
from .rng import SimRng

__all__ = [
    "DEFAULT_MODULUS",
    "PrimeField",
    "SeedAssignment",
    "RandomCoeffs",
    "Share",
    "NodeAggregate",
    "AggregationResult",
    "MixedSeedError",
    "gen_shares",
    "node_aggregate",
    "solve_aggregate",
    "recover_pair_sum",
    "SppdaCluster",
    "run_sppda",
    "run_cpda",
    "RoundTranscript",
]

DEFAULT_MODULUS = 2**31 - 1


class MixedSeedError(ValueError):
    """Shares evaluated at different seeds were summed together."""


def _is_prime(n: int) -> bool:
    # Deterministic Miller-Rabin, valid far beyond 64-bit moduli.
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class PrimeField:
    """Arithmetic mod a prime p; primality checked once at construction."""

    def __init__(self, modulus: int = DEFAULT_MODULUS):
        if not _is_prime(modulus):
            raise ValueError(f"modulus {modulus} is not prime")
        self.p = modulus

    def norm(self, a: int) -> int:
        return a % self.p

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def inv(self, a: int) -> int:
        if a % self.p == 0:
            raise ZeroDivisionError("no inverse of 0")
        return pow(a, self.p - 2, self.p)

    def poly_eval(self, coeffs: list[int], x: int) -> int:
        """coeffs[i] is the x^i coefficient (Horner)."""
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % self.p
        return acc

    def rand_nonzero(self, rng: SimRng) -> int:
        return rng.randrange(1, self.p)

    def __eq__(self, other):
        return isinstance(other, PrimeField) and self.p == other.p

    def __repr__(self):
        return f"PrimeField({self.p})"


@dataclass(frozen=True)
class SeedAssignment:
    """One public evaluation seed per participant; distinct and nonzero."""

    participants: tuple[str, ...]
    seeds: tuple[int, ...]
    field: PrimeField

    def __post_init__(self):
        if len(self.participants) != len(self.seeds):
            raise ValueError("one seed per participant required")
        norm = [self.field.norm(s) for s in self.seeds]
        if any(s == 0 for s in norm):
            raise ValueError("seeds must be nonzero")
        if len(set(norm)) != len(norm):
            raise ValueError("seeds must be pairwise distinct")

    def seed_of(self, participant: str) -> int:
        return self.seeds[self.participants.index(participant)]

    @classmethod
    def draw(
        cls, participants: tuple[str, ...], field: PrimeField, rng: SimRng
    ) -> "SeedAssignment":
        seeds: list[int] = []
        while len(seeds) < len(participants):
            s = field.rand_nonzero(rng)
            if s not in seeds:
                seeds.append(s)
        return cls(participants=participants, seeds=tuple(seeds), field=field)


@dataclass(frozen=True)
class RandomCoeffs:
    r1: int
    r2: int

    @classmethod
    def draw(cls, field: PrimeField, rng: SimRng) -> "RandomCoeffs":
        return cls(r1=rng.randrange(field.p), r2=rng.randrange(field.p))


@dataclass(frozen=True)
class Share:
    producer: str
    evaluated_at: str  # participant whose seed this share was evaluated at
    value: int


@dataclass(frozen=True)
class NodeAggregate:
    participant: str
    value: int


@dataclass(frozen=True)
class AggregationResult:
    total: int      # D = x + y + z
    pair_sum: int   # x + y = D - z


def gen_shares(
    private_value: int,
    producer: str,
    seeds: SeedAssignment,
    coeffs: RandomCoeffs,
) -> list[Share]:
    """One share per participant: v + R1*s_i + R2*s_i^2 at that
    participant's seed."""
    f = seeds.field
    v = f.norm(private_value)
    return [
        Share(
            producer=producer,
            evaluated_at=who,
            value=f.poly_eval([v, coeffs.r1, coeffs.r2], s),
        )
        for who, s in zip(seeds.participants, seeds.seeds)
    ]


def node_aggregate(
    participant: str, shares: list[Share], field: PrimeField
) -> NodeAggregate:
    """Sum the shares a node holds; all must target this node's seed."""
    total = 0
    for share in shares:
        if share.evaluated_at != participant:
            raise MixedSeedError(
                f"share for {share.evaluated_at!r} mixed into {participant!r}'s sum"
            )
        total = field.add(total, share.value)
    return NodeAggregate(participant=participant, value=total)


def solve_aggregate(
    seeds: SeedAssignment, aggregates: list[NodeAggregate]
) -> int:
    """Recover D from the per-node sums.

    The sums are evaluations of one polynomial F with F(0) = D, so D falls
    out of Lagrange interpolation at 0 over the n distinct seeds.
    """
    if len(aggregates) != len(seeds.participants):
        raise ValueError("need one aggregate per participant")
    f = seeds.field
    by_participant = {agg.participant: agg.value for agg in aggregates}
    if set(by_participant) != set(seeds.participants):
        raise ValueError("aggregates do not match the seed assignment")
    xs = [f.norm(s) for s in seeds.seeds]
    ys = [by_participant[p] for p in seeds.participants]
    # Lagrange basis at x = 0:  l_i(0) = prod_{j != i} x_j / (x_j - x_i)
    result = 0
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if j == i:
                continue
            num = f.mul(num, xj)
            den = f.mul(den, f.sub(xj, xi))
        if den == 0:
            raise ZeroDivisionError("duplicate seeds make the system singular")
        result = f.add(result, f.mul(ys[i], f.mul(num, f.inv(den))))
    return result


def recover_pair_sum(total: int, z: int, field: PrimeField) -> int:
    """x + y = D - z; the aggregator subtracts its own (dummy) value."""
    return field.sub(total, z)


@dataclass
class FrameRecord:
    """One logged protocol message: plaintext metadata plus sealed payload.
    Confidentiality scans inspect exactly these plaintext fields."""

    kind: str
    sender: str
    receiver: str
    plaintext_fields: dict
    frame: SealedFrame | None = None


@dataclass
class RoundTranscript:
    seeds: SeedAssignment | None = None
    frames: list[FrameRecord] = field(default_factory=list)
    aggregates: list[NodeAggregate] = field(default_factory=list)
    result: AggregationResult | None = None

    def to_doc(self) -> dict:
        return {
            "seeds": list(self.seeds.seeds) if self.seeds else None,
            "participants": list(self.seeds.participants) if self.seeds else None,
            "frames": [
                {
                    "kind": rec.kind,
                    "sender": rec.sender,
                    "receiver": rec.receiver,
                    "plaintext_fields": {
                        k: (v.hex() if isinstance(v, bytes) else v)
                        for k, v in rec.plaintext_fields.items()
                    },
                    "nonce": rec.frame.nonce.hex() if rec.frame else None,
                    "body": rec.frame.body.hex() if rec.frame else None,
                }
                for rec in self.frames
            ],
            "aggregates": [
                {"participant": a.participant, "value": a.value}
                for a in self.aggregates
            ],
            "result": (
                {"total": self.result.total, "pair_sum": self.result.pair_sum}
                if self.result
                else None
            ),
        }


_PARTICIPANTS = ("A", "S1", "S2")


class SppdaCluster:
    """One (S1, S2, AF) cluster with its key infrastructure set up once.

    The aggregator node doubles as the AF.  run_round executes the full
    three-party exchange for one set of values: seeds broadcast, shares
    generated and delivered over the key-managed channels (S1<->S2 via the
    sealed SS relay), per-node sums returned sealed, aggregator solves.
    """

    def __init__(
        self,
        rng: SimRng,
        field_: PrimeField | None = None,
        pool_size: int = 256,
        af_bank: int = 128,
        node_ids: tuple[int, int, int] = (0, 1, 2),  # (AF, S1, S2)
        cipher=DEFAULT_CIPHER,
    ):
        self.field = field_ or PrimeField()
        self.cipher = cipher
        self.rng = rng
        af_id, s1_id, s2_id = node_ids
        setup = rng.stream("keymgmt")
        pool = generate_pool(pool_size, af_bank, setup.stream("pool"))
        self.af = AggregatorNode(node_id=af_id, bank_af=pool.bank_af)
        self.s1 = SourceNode(node_id=s1_id, bank_af=pool.bank_af, bank_ss=pool.bank_ss)
        self.s2 = SourceNode(node_id=s2_id, bank_af=pool.bank_af, bank_ss=pool.bank_ss)
        register_pair(self.s1, self.af, setup.stream("pair-s1"))
        register_pair(self.s2, self.af, setup.stream("pair-s2"))
        establish_ss_channel(self.s1, self.s2, self.af, setup.stream("ss"), cipher)
        self._names = {af_id: "A", s1_id: "S1", s2_id: "S2"}
        self._round = 0

    def _seal_to_af(self, source: SourceNode, payload: bytes, rng: SimRng,
                    kind: str, transcript: RoundTranscript, fields: dict) -> bytes:
        announcement, key = select_session_key(source, rng)
        nonce = rng.randbytes(NONCE_LEN)
        aad = f"{kind}:{source.node_id}->af".encode()
        body = self.cipher.seal(key, nonce, payload, aad)
        frame = SealedFrame(source.node_id, self.af.node_id, nonce, body)
        transcript.frames.append(FrameRecord(
            kind=kind, sender=self._names[source.node_id], receiver="A",
            plaintext_fields={"r_c": announcement.r_c, **fields}, frame=frame,
        ))
        key_af = af_resolve_key(self.af, announcement)
        return self.cipher.open(key_af, frame.nonce, frame.body, aad)

    def _seal_from_af(self, dest: SourceNode, payload: bytes, rng: SimRng,
                      kind: str, transcript: RoundTranscript, fields: dict) -> bytes:
        r_c = rng.randint(1, len(self.af.bank_af))
        key = self.af.bank_af[self.af.pair_perms[dest.node_id][r_c - 1]]
        nonce = rng.randbytes(NONCE_LEN)
        aad = f"{kind}:af->{dest.node_id}".encode()
        body = self.cipher.seal(key, nonce, payload, aad)
        frame = SealedFrame(self.af.node_id, dest.node_id, nonce, body)
        transcript.frames.append(FrameRecord(
            kind=kind, sender="A", receiver=self._names[dest.node_id],
            plaintext_fields={"r_c": r_c, **fields}, frame=frame,
        ))
        return self.cipher.open(source_resolve_key(dest, r_c), frame.nonce, frame.body, aad)

    def _ss_exchange(self, sender: SourceNode, receiver: SourceNode,
                     payload: bytes, rng: SimRng, kind: str,
                     transcript: RoundTranscript) -> bytes:
        index, frame = ss_send(sender, receiver.node_id, payload, rng, self.cipher)
        # Relayed verbatim by the AF, which holds no SS-bank key.
        transcript.frames.append(FrameRecord(
            kind=kind, sender=self._names[sender.node_id],
            receiver=self._names[receiver.node_id],
            plaintext_fields={"ss_index": index, "relayed_by": "A"}, frame=frame,
        ))
        return ss_receive(receiver, index, frame, self.cipher)

    def run_round(self, x: int, y: int, z: int) -> tuple[AggregationResult, RoundTranscript]:
        self._round += 1
        rng = self.rng.stream(f"round:{self._round}")
        f = self.field
        transcript = RoundTranscript()

        # Aggregator broadcasts distinct nonzero seeds (plaintext).
        seeds = SeedAssignment.draw(_PARTICIPANTS, f, rng.stream("seeds"))
        transcript.seeds = seeds
        transcript.frames.append(FrameRecord(
            kind="seed-broadcast", sender="A", receiver="*",
            plaintext_fields={"seeds": list(seeds.seeds)},
        ))

        values = {"A": f.norm(z), "S1": f.norm(x), "S2": f.norm(y)}
        coeffs = {
            who: RandomCoeffs.draw(f, rng.stream(f"coeffs:{who}"))
            for who in _PARTICIPANTS
        }
        shares = {
            who: gen_shares(values[who], who, seeds, coeffs[who])
            for who in _PARTICIPANTS
        }
        by_target: dict[str, list[Share]] = {who: [] for who in _PARTICIPANTS}
        for who in _PARTICIPANTS:
            for share in shares[who]:
                by_target[share.evaluated_at].append(share)

        # Deliver each producer's off-seed shares over the managed channels.
        chan = rng.stream("channels")
        def move(producer, target, nodes):  # noqa: E306
            share = next(
                s for s in shares[producer] if s.evaluated_at == target
            )
            payload = str(share.value).encode()
            if producer == "A":
                got = self._seal_from_af(nodes[target], payload, chan,
                                         "share", transcript, {"for_seed_of": target})
            elif target == "A":
                got = self._seal_to_af(nodes[producer], payload, chan,
                                       "share", transcript, {"for_seed_of": target})
            else:
                got = self._ss_exchange(nodes[producer], nodes[target], payload,
                                        chan, "share", transcript)
            assert int(got) == share.value

        nodes = {"A": self.af, "S1": self.s1, "S2": self.s2}
        for producer in _PARTICIPANTS:
            for target in _PARTICIPANTS:
                if producer != target:
                    move(producer, target, nodes)

        aggregates = [
            node_aggregate(who, by_target[who], f) for who in _PARTICIPANTS
        ]
        transcript.aggregates = aggregates
        # S1 and S2 return their sums to the aggregator, sealed.
        for who in ("S1", "S2"):
            agg = next(a for a in aggregates if a.participant == who)
            self._seal_to_af(nodes[who], str(agg.value).encode(), chan,
                             "node-sum", transcript, {"participant": who})

        total = solve_aggregate(seeds, aggregates)
        result = AggregationResult(
            total=total, pair_sum=recover_pair_sum(total, values["A"], f)
        )
        transcript.result = result
        return result, transcript


def run_sppda(
    x: int, y: int, z: int, rng: SimRng, field_: PrimeField | None = None
) -> AggregationResult:
    """Full three-party protocol for one round, key setup included."""
    cluster = SppdaCluster(rng, field_=field_)
    result, _ = cluster.run_round(x, y, z)
    return result


def run_cpda(
    values: list[int], rng: SimRng, field_: PrimeField | None = None
) -> int:
    """n-party cluster baseline: degree-(n-1) masks, n x n solve.

    Pure algebra (no key-managed channels); exists to benchmark the
    quadratic share traffic and solve cost against the fixed-size scheme.
    """
    n = len(values)
    if n < 3:
        raise ValueError("cluster baseline needs at least 3 participants")
    f = field_ or PrimeField()
    participants = tuple(f"P{i}" for i in range(n))
    seeds = SeedAssignment.draw(participants, f, rng.stream("seeds"))
    coeff_rng = rng.stream("coeffs")
    sums = [0] * n
    for i in range(n):
        poly = [f.norm(values[i])] + [
            coeff_rng.randrange(f.p) for _ in range(n - 1)
        ]
        for j, s in enumerate(seeds.seeds):
            sums[j] = f.add(sums[j], f.poly_eval(poly, s))
    aggregates = [
        NodeAggregate(participant=p, value=v)
        for p, v in zip(participants, sums)
    ]
    return solve_aggregate(seeds, aggregates)
