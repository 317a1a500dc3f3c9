"""How the scheduling action space grows, and how it is split into dimensions.

Each action is a user subset of size 1..N_max, ranked in the combinatorial
number system; large spaces are split mixed-radix into D sub-indices so the
actor only outputs D numbers.
"""
from mmsched.codec import ActionCodec, count_actions, default_dims

for users, n_max in ((4, 2), (8, 4), (16, 4), (32, 8), (64, 16)):
    a = count_actions(users, n_max)
    d, size = default_dims(a)
    print(f"L={users:3d} N_max={n_max:3d}  actions={a:>22,d}  dims={d} x {size}")

codec = ActionCodec(8, 4, dim_sizes=(13, 13))
for k in (0, 7, 8, 100, codec.num_actions - 1):
    print(k, codec.index_to_subset(k), codec.dim_split(k))
