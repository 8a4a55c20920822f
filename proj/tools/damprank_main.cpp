#include "damprank/cli.hpp"

int main(int argc, char** argv) { return damprank::cli::dispatch(argc, argv); }
