"""
Group-relative advantages and the gated two-task loss
=====================================================

All pure math over logged per-token log-probabilities: no model weights.
"""

import numpy as np

from catloop import (
    CandidateGroup,
    GroupMember,
    GrpoConfig,
    MmtgConfig,
    SequenceLogProbs,
    group_advantages,
    group_report,
    grpo_loss,
    mmtg_loss,
)


def member(logp_cur, logp_ref, reward):
    seq = SequenceLogProbs(
        tokens=tuple(range(len(logp_cur))),
        logp_current=tuple(logp_cur),
        logp_reference=tuple(logp_ref),
    )
    return GroupMember(seq, reward)


# a group of four sampled candidates for one prompt, with their rewards
group = CandidateGroup(
    prompt_id="prompt-42",
    members=(
        member([-0.2, -0.4, -0.1], [-0.3, -0.4, -0.2], reward=0.95),
        member([-1.1, -0.9, -1.4], [-1.0, -0.8, -1.2], reward=0.40),
        member([-2.0, -2.2, -1.8], [-2.0, -2.2, -1.8], reward=0.40),
        member([-0.6, -0.5, -0.8], [-0.9, -0.7, -1.1], reward=0.10),
    ),
)

adv = group_advantages(group)
print("rewards:   ", [m.reward for m in group.members])
print("advantages:", np.round(adv, 4), " (mean:", f"{np.mean(adv):.2e})")

cfg = GrpoConfig(beta=0.1)
total, per_member = grpo_loss(group, cfg)
print("per-member loss:", np.round(per_member, 4))
print("group loss:", round(total, 6))

# the same numbers as a JSON-ready report
print("\nfull report:")
for key, val in group_report(group, cfg).items():
    print(f"  {key}: {val}")

# gated two-task combination ------------------------------------------------
# the harder task dominates; the easier one modulates through tanh

print("\ncombined loss surface (rows: task A, cols: task B):")
vals = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
table = mmtg_loss(vals[:, None], vals[None, :], MmtgConfig(gating=1.0))
header = "      " + "".join(f"{v:8.1f}" for v in vals)
print(header)
for a, row in zip(vals, table):
    print(f"{a:5.1f} " + "".join(f"{x:8.3f}" for x in row))

# result is always between L_max and 2 * L_max
a, b = 2.0, 1.0
print(f"\nmmtg({a}, {b}) = {mmtg_loss(a, b):.6f}  (bounds [{max(a,b)}, {2*max(a,b)}])")
