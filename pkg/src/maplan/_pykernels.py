"""Delete-relaxation kernels, pure Python.

Mirrors ``_ckernels.pyx`` exactly (same algorithm, same tie-breaking) so the
two backends are interchangeable and can be cross-checked.
"""
import heapq
import math

INF = math.inf


class RelaxedTask:
    """Positive-fact relaxation of a set of actions with integer costs.

    ``pres[a]`` and ``adds[a]`` are fact indices in ``range(n_facts)``.
    Actions with no precondition hang off an artificial always-true fact.
    """

    def __init__(self, n_facts, pres, adds, costs=None):
        self.n_facts = n_facts
        self.n_actions = len(pres)
        self._root = n_facts
        self.pres = [sorted(set(p)) or [n_facts] for p in pres]
        self.adds = [sorted(set(a)) for a in adds]
        self.costs = list(costs) if costs is not None else [1] * self.n_actions
        self.pre_of = [[] for _ in range(n_facts + 1)]
        self.adders = [[] for _ in range(n_facts + 1)]
        for a, pre in enumerate(self.pres):
            for f in pre:
                self.pre_of[f].append(a)
        for a, add in enumerate(self.adds):
            for f in add:
                self.adders[f].append(a)

    def _explore(self, state, costs, use_max):
        n = self.n_facts + 1
        fc = [INF] * n
        unsat = [len(p) for p in self.pres]
        acc = [0] * self.n_actions
        pcf = [-1] * self.n_actions
        heap = []
        fc[self._root] = 0
        heap.append((0, self._root))
        for f in state:
            if fc[f] != 0:
                fc[f] = 0
                heap.append((0, f))
        heapq.heapify(heap)
        pre_of, adds = self.pre_of, self.adds
        while heap:
            c, f = heapq.heappop(heap)
            if c > fc[f]:
                continue
            for a in pre_of[f]:
                unsat[a] -= 1
                if use_max:
                    if c > acc[a]:
                        acc[a] = c
                else:
                    acc[a] += c
                if unsat[a] == 0:
                    pcf[a] = f
                    nc = acc[a] + costs[a]
                    for g in adds[a]:
                        if nc < fc[g]:
                            fc[g] = nc
                            heapq.heappush(heap, (nc, g))
        return fc, pcf

    def fact_costs(self, state, use_max=True):
        return self._explore(state, self.costs, use_max)[0][: self.n_facts]

    def hmax(self, state, goal):
        fc = self._explore(state, self.costs, True)[0]
        return max((fc[g] for g in goal), default=0)

    def hadd(self, state, goal):
        fc = self._explore(state, self.costs, False)[0]
        return sum(fc[g] for g in goal)

    def both(self, state, goal):
        return self.hmax(state, goal), self.hadd(state, goal)

    def lmcut(self, state, goal):
        """Landmark-cut lower bound on the cost of reaching all of ``goal``."""
        goal = sorted(set(goal))
        if not goal:
            return 0
        costs = list(self.costs)
        total = 0
        while True:
            fc, pcf = self._explore(state, costs, True)
            gpcf = goal[0]
            for g in goal:
                if fc[g] > fc[gpcf]:
                    gpcf = g
            if fc[gpcf] == INF:
                return INF
            if fc[gpcf] == 0:
                return total
            star = bytearray(self.n_facts + 1)
            star[gpcf] = 1
            stack = [gpcf]
            while stack:
                f = stack.pop()
                for a in self.adders[f]:
                    if costs[a] == 0 and pcf[a] >= 0 and not star[pcf[a]]:
                        star[pcf[a]] = 1
                        stack.append(pcf[a])
            zero = bytearray(self.n_facts + 1)
            zero[self._root] = 1
            stack = [self._root]
            for f in state:
                if not zero[f]:
                    zero[f] = 1
                    stack.append(f)
            in_cut = bytearray(self.n_actions)
            cut = []
            while stack:
                f = stack.pop()
                for a in self.pre_of[f]:
                    if pcf[a] != f:
                        continue
                    for g in self.adds[a]:
                        if star[g]:
                            if not in_cut[a]:
                                in_cut[a] = 1
                                cut.append(a)
                        elif not zero[g]:
                            zero[g] = 1
                            stack.append(g)
            m = min(costs[a] for a in cut)
            total += m
            for a in cut:
                costs[a] -= m
