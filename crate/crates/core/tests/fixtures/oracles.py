# Independent high-precision values frozen into the Rust tests (mpmath).
from mpmath import mp, mpf, mpc, findroot, quad, gamma, sqrt, exp, inf, polyroots
mp.dps = 30
def P(z, tau, a, hp): return tau*z**2 + z**a - hp
# lambda by bisection
def bis(f, lo, hi):
    for _ in range(200):
        m=(lo+hi)/2
        if f(m)>0: hi=m
        else: lo=m
    return (lo+hi)/2
lam = bis(lambda z: P(z,1,mpf('0.5'),1), mpf(0), mpf(2))
print("lambda tau1 a.5", lam)
for a in ['0.25','0.75']:
    print("lambda tau1 a", a, bis(lambda z: P(z,1,mpf(a),1), mpf(0), mpf(2)))
# complex pair via 2-D newton (findroot)
for a in ['0.5','0.25','0.75','0.999']:
    r = findroot(lambda z: P(z,1,mpf(a),1), mpc(-1,0.5))
    print("pair a",a, r, abs(P(r,1,mpf(a),1)))
# right region around phi+ : tau z^2 + z^a + 1 = 0 roots
r = findroot(lambda z: z**2 + z**mpf('0.5') + 1, mpc(-0.3,1.0))
print("phi+ mode", r)
# I[xi e^xi] alpha .5 brute force 2-D
a = mpf('0.5')
vp = lambda x: (1+x)*exp(x)
inner = lambda xi: quad(lambda s: vp(xi-s)*s**(-a), [0, 1, 10, inf])
I = quad(lambda xi: vp(xi)*inner(xi), [-inf, -10, -1, 0])
print("I brute", I, "closed", a*gamma(1-a)/4)
