package org.example.books;

import android.app.Service;
import android.content.Intent;
import android.database.sqlite.SQLiteDatabase;
import android.os.IBinder;

public class LifecycleMissingClose extends Service {
    private SQLiteDatabase db;
    private BooksHelper helper;

    @Override
    public void onCreate() {
        super.onCreate();
        helper = new BooksHelper(this);
        db = helper.getWritableDatabase(); // LEAK: lifecycle_pairing
    }

    @Override
    public void onDestroy() {
        helper = null;
        super.onDestroy();
    }

    @Override
    public IBinder onBind(Intent intent) {
        return null;
    }
}
