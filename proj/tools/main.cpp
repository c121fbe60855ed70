#include "agentmart/cli.hpp"

int main(int argc, char** argv) { return agentmart::cli(argc, argv); }
