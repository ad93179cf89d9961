/* Memory-intensive workload: builds an integer array of the requested
 * size in MiB inside the serving process and sums it. malloc/free are
 * external helpers resolved by call rewriting, so the channel carries
 * only the size parameter, never the data. */
long sum_array(long mib) {
  long n = mib * 1024 * 1024 / 4;
  int *data = (int *)malloc(n * sizeof(int));
  long total = 0;
  long i;
  if (!data)
    return -1;
  for (i = 0; i < n; i++)
    data[i] = (int)(i & 0xff);
  for (i = 0; i < n; i++)
    total += data[i];
  free(data);
  return total;
}
