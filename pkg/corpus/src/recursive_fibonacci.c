/* CPU-intensive workload. Declared static so the assembler resolves the
 * self-call to a relative displacement at assembly time; a global symbol
 * would leave a relocation in the byte range and the payload would no
 * longer be self-contained. */
__attribute__((used)) static long recursive_fibonacci(long n) {
  if (n < 2)
    return n;
  return recursive_fibonacci(n - 1) + recursive_fibonacci(n - 2);
}
