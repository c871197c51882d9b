# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Delete-relaxation kernels, compiled.  Same algorithm as ``_pykernels``."""
from libc.stdlib cimport malloc, free

cdef long long CINF = 1LL << 60
INF = float("inf")


cdef inline void _push(long long* hc, int* hf, int* size, long long c, int f):
    cdef int i = size[0]
    cdef int parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if hc[parent] < c or (hc[parent] == c and hf[parent] <= f):
            break
        hc[i] = hc[parent]
        hf[i] = hf[parent]
        i = parent
    hc[i] = c
    hf[i] = f


cdef inline void _pop(long long* hc, int* hf, int* size, long long* c, int* f):
    c[0] = hc[0]
    f[0] = hf[0]
    size[0] -= 1
    cdef int n = size[0]
    if n == 0:
        return
    cdef long long lc = hc[n]
    cdef int lf = hf[n]
    cdef int i = 0
    cdef int child
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and (hc[child + 1] < hc[child] or (hc[child + 1] == hc[child] and hf[child + 1] < hf[child])):
            child += 1
        if lc < hc[child] or (lc == hc[child] and lf <= hf[child]):
            break
        hc[i] = hc[child]
        hf[i] = hf[child]
        i = child
    hc[i] = lc
    hf[i] = lf


cdef class RelaxedTask:
    cdef public int n_facts
    cdef public int n_actions
    cdef int root
    cdef int* pre_start
    cdef int* pre_idx
    cdef int* add_start
    cdef int* add_idx
    cdef int* preof_start
    cdef int* preof_idx
    cdef int* adders_start
    cdef int* adders_idx
    cdef long long* base_cost
    cdef int heap_cap

    def __cinit__(self, int n_facts, pres, adds, costs=None):
        self.pre_start = NULL
        self.pre_idx = NULL
        self.add_start = NULL
        self.add_idx = NULL
        self.preof_start = NULL
        self.preof_idx = NULL
        self.adders_start = NULL
        self.adders_idx = NULL
        self.base_cost = NULL

    def __init__(self, int n_facts, pres, adds, costs=None):
        cdef int a, i, k, f
        self.n_facts = n_facts
        self.root = n_facts
        self.n_actions = len(pres)
        norm_pres = [sorted(set(p)) or [n_facts] for p in pres]
        norm_adds = [sorted(set(x)) for x in adds]
        if costs is None:
            costs = [1] * self.n_actions
        n_pre = sum(len(p) for p in norm_pres)
        n_add = sum(len(x) for x in norm_adds)
        self.pre_start = <int*> malloc((self.n_actions + 1) * sizeof(int))
        self.pre_idx = <int*> malloc((n_pre + 1) * sizeof(int))
        self.add_start = <int*> malloc((self.n_actions + 1) * sizeof(int))
        self.add_idx = <int*> malloc((n_add + 1) * sizeof(int))
        self.preof_start = <int*> malloc((n_facts + 2) * sizeof(int))
        self.preof_idx = <int*> malloc((n_pre + 1) * sizeof(int))
        self.adders_start = <int*> malloc((n_facts + 2) * sizeof(int))
        self.adders_idx = <int*> malloc((n_add + 1) * sizeof(int))
        self.base_cost = <long long*> malloc((self.n_actions + 1) * sizeof(long long))
        self.heap_cap = n_facts + 2 + n_add
        k = 0
        for a in range(self.n_actions):
            self.pre_start[a] = k
            for f in norm_pres[a]:
                self.pre_idx[k] = f
                k += 1
            self.base_cost[a] = costs[a]
        self.pre_start[self.n_actions] = k
        k = 0
        for a in range(self.n_actions):
            self.add_start[a] = k
            for f in norm_adds[a]:
                self.add_idx[k] = f
                k += 1
        self.add_start[self.n_actions] = k
        pre_of = [[] for _ in range(n_facts + 1)]
        adders = [[] for _ in range(n_facts + 1)]
        for a in range(self.n_actions):
            for f in norm_pres[a]:
                pre_of[f].append(a)
            for f in norm_adds[a]:
                adders[f].append(a)
        k = 0
        for f in range(n_facts + 1):
            self.preof_start[f] = k
            for a in pre_of[f]:
                self.preof_idx[k] = a
                k += 1
        self.preof_start[n_facts + 1] = k
        k = 0
        for f in range(n_facts + 1):
            self.adders_start[f] = k
            for a in adders[f]:
                self.adders_idx[k] = a
                k += 1
        self.adders_start[n_facts + 1] = k

    def __dealloc__(self):
        free(self.pre_start)
        free(self.pre_idx)
        free(self.add_start)
        free(self.add_idx)
        free(self.preof_start)
        free(self.preof_idx)
        free(self.adders_start)
        free(self.adders_idx)
        free(self.base_cost)

    cdef void _explore(self, int* state, int n_state, long long* costs, bint use_max,
                       long long* fc, int* pcf, int* unsat, long long* acc,
                       long long* hc, int* hf):
        cdef int n = self.n_facts + 1
        cdef int i, k, a, g, f
        cdef int size = 0
        cdef long long c, nc
        for i in range(n):
            fc[i] = CINF
        for a in range(self.n_actions):
            unsat[a] = self.pre_start[a + 1] - self.pre_start[a]
            acc[a] = 0
            pcf[a] = -1
        fc[self.root] = 0
        _push(hc, hf, &size, 0, self.root)
        for i in range(n_state):
            f = state[i]
            if fc[f] != 0:
                fc[f] = 0
                _push(hc, hf, &size, 0, f)
        while size > 0:
            _pop(hc, hf, &size, &c, &f)
            if c > fc[f]:
                continue
            for k in range(self.preof_start[f], self.preof_start[f + 1]):
                a = self.preof_idx[k]
                unsat[a] -= 1
                if use_max:
                    if c > acc[a]:
                        acc[a] = c
                else:
                    acc[a] += c
                if unsat[a] == 0:
                    pcf[a] = f
                    nc = acc[a] + costs[a]
                    for i in range(self.add_start[a], self.add_start[a + 1]):
                        g = self.add_idx[i]
                        if nc < fc[g]:
                            fc[g] = nc
                            _push(hc, hf, &size, nc, g)

    cdef object _h(self, state, goal, bint use_max):
        cdef int n = self.n_facts + 1
        cdef int ns = len(state)
        cdef int i
        cdef long long best = 0
        cdef long long v
        cdef int* st = <int*> malloc((ns + 1) * sizeof(int))
        cdef long long* fc = <long long*> malloc(n * sizeof(long long))
        cdef int* pcf = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef int* unsat = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef long long* acc = <long long*> malloc((self.n_actions + 1) * sizeof(long long))
        cdef long long* hc = <long long*> malloc(self.heap_cap * sizeof(long long))
        cdef int* hf = <int*> malloc(self.heap_cap * sizeof(int))
        try:
            for i in range(ns):
                st[i] = state[i]
            self._explore(st, ns, self.base_cost, use_max, fc, pcf, unsat, acc, hc, hf)
            for g in goal:
                v = fc[<int> g]
                if v >= CINF:
                    return INF
                if use_max:
                    if v > best:
                        best = v
                else:
                    best += v
            return best
        finally:
            free(st)
            free(fc)
            free(pcf)
            free(unsat)
            free(acc)
            free(hc)
            free(hf)

    def hmax(self, state, goal):
        return self._h(state, goal, True)

    def hadd(self, state, goal):
        return self._h(state, goal, False)

    def both(self, state, goal):
        return self._h(state, goal, True), self._h(state, goal, False)

    def fact_costs(self, state, use_max=True):
        cdef int n = self.n_facts + 1
        cdef int ns = len(state)
        cdef int i
        cdef int* st = <int*> malloc((ns + 1) * sizeof(int))
        cdef long long* fc = <long long*> malloc(n * sizeof(long long))
        cdef int* pcf = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef int* unsat = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef long long* acc = <long long*> malloc((self.n_actions + 1) * sizeof(long long))
        cdef long long* hc = <long long*> malloc(self.heap_cap * sizeof(long long))
        cdef int* hf = <int*> malloc(self.heap_cap * sizeof(int))
        try:
            for i in range(ns):
                st[i] = state[i]
            self._explore(st, ns, self.base_cost, use_max, fc, pcf, unsat, acc, hc, hf)
            return [INF if fc[i] >= CINF else fc[i] for i in range(self.n_facts)]
        finally:
            free(st)
            free(fc)
            free(pcf)
            free(unsat)
            free(acc)
            free(hc)
            free(hf)

    def lmcut(self, state, goal):
        cdef int n = self.n_facts + 1
        cdef int ns = len(state)
        cdef int i, k, a, f, g, gpcf, sp, ncut
        cdef long long m, total = 0
        goal = sorted(set(goal))
        if not goal:
            return 0
        cdef int ng = len(goal)
        cdef int* gl = <int*> malloc(ng * sizeof(int))
        cdef int* st = <int*> malloc((ns + 1) * sizeof(int))
        cdef long long* costs = <long long*> malloc((self.n_actions + 1) * sizeof(long long))
        cdef long long* fc = <long long*> malloc(n * sizeof(long long))
        cdef int* pcf = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef int* unsat = <int*> malloc((self.n_actions + 1) * sizeof(int))
        cdef long long* acc = <long long*> malloc((self.n_actions + 1) * sizeof(long long))
        cdef long long* hc = <long long*> malloc(self.heap_cap * sizeof(long long))
        cdef int* hf = <int*> malloc(self.heap_cap * sizeof(int))
        cdef char* star = <char*> malloc(n)
        cdef char* zero = <char*> malloc(n)
        cdef char* in_cut = <char*> malloc(self.n_actions + 1)
        cdef int* stack = <int*> malloc((n + 1) * sizeof(int))
        cdef int* cut = <int*> malloc((self.n_actions + 1) * sizeof(int))
        try:
            for i in range(ng):
                gl[i] = goal[i]
            for i in range(ns):
                st[i] = state[i]
            for a in range(self.n_actions):
                costs[a] = self.base_cost[a]
            while True:
                self._explore(st, ns, costs, True, fc, pcf, unsat, acc, hc, hf)
                gpcf = gl[0]
                for i in range(ng):
                    if fc[gl[i]] > fc[gpcf]:
                        gpcf = gl[i]
                if fc[gpcf] >= CINF:
                    return INF
                if fc[gpcf] == 0:
                    return total
                for i in range(n):
                    star[i] = 0
                    zero[i] = 0
                star[gpcf] = 1
                sp = 0
                stack[sp] = gpcf
                sp += 1
                while sp > 0:
                    sp -= 1
                    f = stack[sp]
                    for k in range(self.adders_start[f], self.adders_start[f + 1]):
                        a = self.adders_idx[k]
                        if costs[a] == 0 and pcf[a] >= 0 and not star[pcf[a]]:
                            star[pcf[a]] = 1
                            stack[sp] = pcf[a]
                            sp += 1
                zero[self.root] = 1
                stack[0] = self.root
                sp = 1
                for i in range(ns):
                    f = st[i]
                    if not zero[f]:
                        zero[f] = 1
                        stack[sp] = f
                        sp += 1
                for a in range(self.n_actions):
                    in_cut[a] = 0
                ncut = 0
                while sp > 0:
                    sp -= 1
                    f = stack[sp]
                    for k in range(self.preof_start[f], self.preof_start[f + 1]):
                        a = self.preof_idx[k]
                        if pcf[a] != f:
                            continue
                        for i in range(self.add_start[a], self.add_start[a + 1]):
                            g = self.add_idx[i]
                            if star[g]:
                                if not in_cut[a]:
                                    in_cut[a] = 1
                                    cut[ncut] = a
                                    ncut += 1
                            elif not zero[g]:
                                zero[g] = 1
                                stack[sp] = g
                                sp += 1
                m = costs[cut[0]]
                for i in range(ncut):
                    if costs[cut[i]] < m:
                        m = costs[cut[i]]
                total += m
                for i in range(ncut):
                    costs[cut[i]] -= m
        finally:
            free(gl)
            free(st)
            free(costs)
            free(fc)
            free(pcf)
            free(unsat)
            free(acc)
            free(hc)
            free(hf)
            free(star)
            free(zero)
            free(in_cut)
            free(stack)
            free(cut)
