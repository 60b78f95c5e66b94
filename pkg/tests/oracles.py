"""Straight-line transcriptions of the metric pseudocode, used as test oracles.

Deliberately naive: plain loops, plain ``sum``, no shared helpers with the
package beyond the input container. Collections that the pseudocode writes
as sets of values are lists here so equal values are not merged.
"""

from __future__ import annotations


def Ratio(a, b):
    return a / b


def Contrast(a, b):
    return (a - b) / (a + b)


def mean(xs):
    return sum(xs) / len(xs)


def Smooth(values, w):
    # window clipped to the largest odd length not exceeding the series
    L = len(values)
    if w > L:
        w = L if L % 2 == 1 else L - 1
    h = w // 2
    out = []
    for i in range(L):
        lo = i - h
        hi = i + h
        if lo < 0:
            lo = 0
        if hi > L - 1:
            hi = L - 1
        total = 0.0
        for j in range(lo, hi + 1):
            total += values[j]
        out.append(total / (hi - lo + 1))
    return out


def forward_transfer(T, t, P_E, N, compare=Ratio):
    FTs = []
    LearnedTasks = set()
    LearnedTaskPairs = set()
    for n in range(1, N + 1):
        if t(n) not in LearnedTasks:
            LearnedTasks = LearnedTasks | {t(n)}
            for tt in T - LearnedTasks:
                if (t(n), tt) not in LearnedTaskPairs:
                    LearnedTaskPairs = LearnedTaskPairs | {(t(n), tt)}
                    P_n, P_t = P_E[(n, tt)], P_E[(n - 1, tt)]
                    FTs.append(compare(P_n, P_t))
    return mean(FTs) if FTs else None


def backward_transfer(T, t, P_E, N, compare=Ratio):
    BTs = []
    LearnedTasks = {t(1)}  # the first learned task is already learned when the loop starts at n=2
    LearnedTaskPairs = set()
    for n in range(2, N + 1):
        if t(n) not in LearnedTasks:
            LearnedTasks = LearnedTasks | {t(n)}
        for tt in T - {t(n)}:
            if frozenset((t(n), tt)) not in LearnedTaskPairs and tt in LearnedTasks:
                LearnedTaskPairs = LearnedTaskPairs | {frozenset((t(n), tt))}
                P_prev, P_n = P_E[(n - 1, tt)], P_E[(n, tt)]
                BTs.append(compare(P_n, P_prev))
    return mean(BTs) if BTs else None


def performance_maintenance(T, t, P_E, N):
    MVs = {tt: [] for tt in T}
    PMs = []
    MRB = {tt: float("-inf") for tt in T}
    for n in range(1, N + 1):
        MRB[t(n)] = n
        for tt in T:
            if MRB[tt] > 0 and tt != t(n):
                MVs[tt].append(P_E[(n, tt)] - P_E[(MRB[tt], tt)])
    for tt in T:
        if MVs[tt]:  # a task with no maintenance values contributes nothing
            PMs.append(mean(MVs[tt]))
    return mean(PMs) if PMs else None


def _ste_blocks(t, P_L, N, ste_cat, task):
    # the STE is cut into blocks with the same lengths as the LL blocks for that task
    blocks = {}
    pos = 0
    for n in range(1, N + 1):
        if t(n) == task:
            blocks[n] = ste_cat[pos : pos + len(P_L[n])]
            pos += len(P_L[n])
    return blocks


def relative_performance(T, t, P_L, N, P_STE):
    RPs = []
    for tt in T:
        if not any(t(n) == tt for n in range(1, N + 1)):
            continue
        ste = _ste_blocks(t, P_L, N, P_STE[tt], tt)
        num = 0.0
        den = 0.0
        for n in range(1, N + 1):
            if t(n) == tt:
                for l in range(len(P_L[n])):
                    num += P_L[n][l]
                    den += ste[n][l]
        RPs.append(num / den)
    return mean(RPs) if RPs else None


def sample_efficiency(T, t, P_L, N, P_STE, w):
    SEs = []
    for tt in T:
        if not any(t(n) == tt for n in range(1, N + 1)):
            continue
        ste = _ste_blocks(t, P_L, N, P_STE[tt], tt)
        P_L_cat = []
        P_STE_cat = []
        for n in range(1, N + 1):
            if t(n) == tt:
                P_L_cat += list(P_L[n])
                P_STE_cat += list(ste[n])
        sL, sS = Smooth(P_L_cat, w), Smooth(P_STE_cat, w)
        SatVal_L = max(sL)
        SatExp_L = sL.index(SatVal_L) + 1
        SatVal_S = max(sS)
        SatExp_S = sS.index(SatVal_S) + 1
        SEs.append((SatVal_L / SatVal_S) * (SatExp_S / SatExp_L))
    return mean(SEs) if SEs else None


def from_summaries(s):
    """(T, t, P_E, N) from a BlockSummaries value."""
    tasks = s.block_tasks
    return set(s.task_set), (lambda n: tasks[n - 1]), dict(s.eval), len(tasks)
