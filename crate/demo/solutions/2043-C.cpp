#include <bits/stdc++.h>
using namespace std;

// Sums of subarrays over a[l, r) that avoid the odd element form one
// contiguous range containing 0; so do those that include it.
static pair<long long, long long> span(const vector<long long>& a, int l, int r) {
    long long pre = 0, lo = 0, hi = 0, minPre = 0, maxPre = 0;
    for (int i = l; i < r; i++) {
        pre += a[i];
        lo = min(lo, pre - maxPre);
        hi = max(hi, pre - minPre);
        minPre = min(minPre, pre);
        maxPre = max(maxPre, pre);
    }
    return {lo, hi};
}

int main() {
    int t;
    if (scanf("%d", &t) != 1) return 0;
    while (t--) {
        int n;
        scanf("%d", &n);
        vector<long long> a(n);
        int pos = -1;
        for (int i = 0; i < n; i++) {
            scanf("%lld", &a[i]);
            if (a[i] != 1 && a[i] != -1) pos = i;
        }
        vector<pair<long long, long long>> ranges;
        if (pos < 0) {
            ranges.push_back(span(a, 0, n));
        } else {
            auto L = span(a, 0, pos), R = span(a, pos + 1, n);
            ranges.push_back({min(L.first, R.first), max(L.second, R.second)});
            // suffixes of the left part and prefixes of the right part
            long long s = 0, sufLo = 0, sufHi = 0;
            for (int i = pos - 1; i >= 0; i--) { s += a[i]; sufLo = min(sufLo, s); sufHi = max(sufHi, s); }
            long long p = 0, preLo = 0, preHi = 0;
            for (int i = pos + 1; i < n; i++) { p += a[i]; preLo = min(preLo, p); preHi = max(preHi, p); }
            ranges.push_back({a[pos] + sufLo + preLo, a[pos] + sufHi + preHi});
        }
        sort(ranges.begin(), ranges.end());
        vector<pair<long long, long long>> merged;
        for (auto r : ranges) {
            if (!merged.empty() && r.first <= merged.back().second + 1)
                merged.back().second = max(merged.back().second, r.second);
            else
                merged.push_back(r);
        }
        long long count = 0;
        for (auto& r : merged) count += r.second - r.first + 1;
        printf("%lld\n", count);
        string line;
        for (auto& r : merged)
            for (long long v = r.first; v <= r.second; v++) line += to_string(v) + ' ';
        if (!line.empty()) line.pop_back();
        puts(line.c_str());
    }
}
