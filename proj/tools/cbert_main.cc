#include "cbert/cli/cli.h"

int main(int argc, char** argv) { return cbert::cli::run(argc, argv); }
