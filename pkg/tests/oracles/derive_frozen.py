"""High-precision derivation of the frozen values in test_fisher.py and test_optimize.py.

Uses mpmath only, building every quantity from its definition rather than
from spinmetro: the Fisher matrix sample by sample, the ratio maximum by root
finding, and the sensitivity by quadrature. Run with ``python tests/oracles/derive_frozen.py``.
"""
import mpmath as mp
mp.mp.dps = 40

def fisher_crb(c, alpha, delta, sigma, ts, M, lever=0, att=1):
    F = mp.zeros(3, 3)
    for m in range(M):
        t = m * ts
        x = c * att * mp.exp(1j * delta * lever) * mp.exp((1j * delta + alpha) * t)
        cols = [x / c, t * x, 1j * (lever + t) * x]
        for i in range(3):
            for j in range(3):
                F[i, j] += mp.re(mp.conj(cols[i]) * cols[j]) / sigma**2
    inv = F ** -1
    return [mp.sqrt(inv[i, i]) for i in range(3)]

print("A classical", fisher_crb(1, -1, mp.mpf('0.1'), mp.mpf('0.01'), mp.mpf('0.02'), 512))
K, p, tw = 10, mp.mpf('0.11'), mp.mpf('0.7')
beta = K**p * -1
print("B ghz", fisher_crb(1, -1, mp.mpf('0.1'), mp.mpf('0.01'), mp.mpf('0.02'), 512, lever=K*tw, att=mp.exp(beta*tw)))

def rinf(K, p, tw):
    x = -K * tw
    return mp.exp(-K**p * tw) * mp.sqrt(1 - 2*x*(1-x))
for K, p in ((10, mp.mpf('0.11')), (13, mp.mpf('0.5')), (64, mp.mpf(0))):
    t = mp.findroot(lambda s: mp.diff(lambda u: rinf(K, p, u), s), 0.5 / K**p)
    print("C", K, p, t, rinf(K, p, t))

def s_unit(T, tw=0, K=1, p=1):
    L = T - tw
    I = mp.quad(lambda t: (K*tw + t)**2 * mp.exp(-2*t), [0, L])
    return mp.sqrt(T) * mp.exp(K**p * tw) / mp.sqrt(I)
T = mp.findroot(lambda s: mp.diff(s_unit, s), 1.7)
print("D std", T, s_unit(T))
K, p = 13, mp.mpf('0.11')
f = lambda T, tw: mp.log(s_unit(T, tw, K, p))
sol = mp.findroot([lambda T, tw: mp.diff(f, (T, tw), (1, 0)), lambda T, tw: mp.diff(f, (T, tw), (0, 1))], (1.2, 0.5))
print("E ghz", sol.T, s_unit(sol[0], sol[1], K, p))
