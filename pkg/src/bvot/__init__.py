"""Self-tallying boardroom voting.

Candidates are encoded as masked primes handed out over oblivious transfer;
votes are threshold-ElGamal ciphertexts on an authenticated broadcast bus;
the tally is the factored product of everything public.  See README.md for
the protocol walk-through and the demos/ scripts for narrative entry points.
"""

from .group import (
    GroupElement,
    GroupParams,
    PRESETS,
    RFC3526_2048,
    Scalar,
    TOY_64,
    generate_params,
    validate_params,
)
from .elgamal import (
    AggregatePublicKey,
    Ciphertext,
    DecryptionShare,
    EncryptionRecord,
    PrivateShare,
    PublicShare,
    aggregate,
    combine,
    commit,
    encrypt,
    keygen,
    share_for_product,
    verify_commitment,
)
from .ot import OTChoice, OTNReceiverSession, OTNSenderSession, otn_run
from .ballot import (
    AnomalyReport,
    CandidateBlockMap,
    ExponentVector,
    Mask,
    PrimeAssignment,
    PrimeTable,
    TallyProduct,
    candidate_totals,
    check_lambda_policy,
    collusion_unmask_demo,
    compute_product,
    factor_tally,
    mask_all,
    select_primes,
    unmask_factor,
)
from .protocol import (
    DistributorNode,
    ElectionConfig,
    ElectionResult,
    ObserverNode,
    VoterNode,
    finalize_log,
    replay,
)
from .transport import BusLog, DeterministicBus, Envelope, Signer
from .simulate import SimulationSpec, run_simulation

__version__ = "0.1.0"
