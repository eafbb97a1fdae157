#include <math.h>
#include <stdio.h>
#include "twlp.h"

#define N 16

int main(void) {
    double v[N * N], re[N * N], im[N * N], n0, n1;
    for (int i = 0; i < N * N; i++)
        v[i] = sin(0.7 * i) + cos(0.13 * i * i);
    for (int k = 0; k < N; k++) {
        double s = 0.0;
        for (int j = 0; j < N; j++) s += v[k * N + j];
        for (int j = 0; j < N; j++) v[k * N + j] -= s / N;
    }
    TwlpSignal *f = NULL, *g = NULL;
    if (twlp_signal_new(N, N, 1.0, v, N * N, &f) != TWLP_STATUS_OK) return 1;
    if (twlp_filter(f, TWLP_MULTIPLIER_RIESZ1, &g) != TWLP_STATUS_OK) return 2;
    if (twlp_signal_real(g, re, N * N) != TWLP_STATUS_OK) return 3;
    if (twlp_signal_imag(g, im, N * N) != TWLP_STATUS_OK) return 4;
    twlp_signal_norm_l2(f, &n0);
    twlp_signal_norm_l2(g, &n1);
    if (!(n1 > 0.0 && n1 <= n0 * (1.0 + 1e-12))) return 5;
    if (twlp_signal_real(g, re, 3) != TWLP_STATUS_SHAPE_MISMATCH) return 6;
    char msg[256];
    if (twlp_last_error(msg, sizeof msg) == 0) return 7;
    if (twlp_classify_region(1.0, 1.0) != 1) return 8;
    twlp_signal_free(g);
    twlp_signal_free(f);
    printf("ok %s\n", twlp_version());
    return 0;
}
