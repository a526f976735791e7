#include "cbayes/cli.hpp"

int main(int argc, char** argv) { return cbayes::cli::run(argc, argv); }
