#include <iostream>

int main() {
  std::cout << "gridse: CLI under construction\n";
  return 0;
}
