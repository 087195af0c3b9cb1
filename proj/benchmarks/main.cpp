#include <benchmark/benchmark.h>

// Own main: the packaged benchmark_main archive was built with a different LTO version.
BENCHMARK_MAIN();
